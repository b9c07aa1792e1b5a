"""Continual learning with Monte Carlo functional regularisation.

Mean-field variational networks trained sequentially over tasks; forgetting is
mitigated by fitting per-output prediction distributions from MC samples and
penalising their divergence from the previous task's model.
"""

from .autodiff import Tensor, categorical_log_likelihood, differentiable_median
from .bnn import (Architecture, ModelSnapshot, VariationalParams, forward,
                  predict_mc, sample_weights)
from .data import SyntheticSpec, TaskBundle, make_split_tasks, make_synthetic_split
from .distributions import (GaussianMultivariate, UnivariateFit, fit_moments,
                            kl_cauchy, kl_gaussian, kl_laplace,
                            w2_gaussian_multivariate, w2_gaussian_univariate)
from .regularizer import total_regulariser
from .reporting import RunReport, average_accuracy, backward_transfer
from .trainer import ContinualTrainer, TrainConfig

__all__ = [
    "Tensor", "categorical_log_likelihood", "differentiable_median",
    "Architecture", "ModelSnapshot", "VariationalParams", "forward",
    "predict_mc", "sample_weights",
    "SyntheticSpec", "TaskBundle", "make_split_tasks", "make_synthetic_split",
    "GaussianMultivariate", "UnivariateFit", "fit_moments",
    "kl_cauchy", "kl_gaussian", "kl_laplace",
    "w2_gaussian_multivariate", "w2_gaussian_univariate",
    "total_regulariser", "RunReport", "average_accuracy", "backward_transfer",
    "ContinualTrainer", "TrainConfig",
]

__version__ = "0.1.0"
