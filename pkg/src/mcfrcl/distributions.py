"""Univariate Gaussian/Laplace/Cauchy fits and their closed-form divergences.

Parameters are estimated by moment matching: Gaussian from mean and variance,
Laplace location from the mean with scale sqrt(var/2), Cauchy location from the
median with scale equal to the median absolute deviation. All fits stay on the
autodiff tape, so divergences between fitted distributions are differentiable
with respect to the underlying samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor

GAUSSIAN = "gaussian"
LAPLACE = "laplace"
CAUCHY = "cauchy"
FAMILIES = (GAUSSIAN, LAPLACE, CAUCHY)

# Zero-variance sample sets would otherwise produce singular divergences.
SCALE_FLOOR = 1e-6


@dataclass
class UnivariateFit:
    """A fitted location/scale family; parameters may be scalar or gridded."""

    family: str
    loc: Tensor
    scale: Tensor

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        self.loc = Tensor._wrap(self.loc)
        self.scale = Tensor._wrap(self.scale)


@dataclass
class GaussianMultivariate:
    """Mean vector and covariance matrix; validation oracle only."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.cov = np.asarray(self.cov, dtype=np.float64)


def fit_moments(samples: Tensor, family: str, axis: int = 0) -> UnivariateFit:
    """Fit one family to samples along `axis` (population variance, divisor n).

    Scales are floored at SCALE_FLOOR so constant samples stay usable.
    """
    samples = Tensor._wrap(samples)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    n = samples.shape[axis]
    if n < 2:
        raise ValueError(f"fit_moments needs at least 2 samples, got {n}")
    keep = list(samples.shape)
    keep[axis] = 1
    if family in (GAUSSIAN, LAPLACE):
        loc = samples.mean(axis=axis)
        centered = samples - samples.mean(axis=axis, keepdims=True)
        var = centered.square().mean(axis=axis)
        if family == GAUSSIAN:
            scale = var.maximum(SCALE_FLOOR ** 2).sqrt()
        else:
            scale = (var / 2.0).maximum(SCALE_FLOOR ** 2).sqrt()
    else:
        loc = samples.median(axis=axis)
        deviations = (samples - loc.reshape(keep)).abs()
        scale = deviations.median(axis=axis).maximum(SCALE_FLOOR)
    return UnivariateFit(family, loc, scale)


def _check_pair(p1: UnivariateFit, p2: UnivariateFit, expected: str, op: str):
    if p1.family != expected or p2.family != expected:
        raise ValueError(f"{op} requires two {expected} fits, "
                         f"got {p1.family}/{p2.family}")
    if p1.loc.shape != p2.loc.shape:
        raise ValueError(f"{op}: parameter shapes differ "
                         f"{p1.loc.shape} vs {p2.loc.shape}")


def kl_gaussian(p1: UnivariateFit, p2: UnivariateFit) -> Tensor:
    """KL(N(mu1, s1) || N(mu2, s2)), elementwise."""
    _check_pair(p1, p2, GAUSSIAN, "kl_gaussian")
    ratio = p2.scale / p1.scale
    return ratio.log() \
        + (p1.scale.square() + (p1.loc - p2.loc).square()) / (2.0 * p2.scale.square()) \
        - 0.5


def kl_laplace(p1: UnivariateFit, p2: UnivariateFit) -> Tensor:
    """KL(Laplace(a1, b1) || Laplace(a2, b2)), elementwise."""
    _check_pair(p1, p2, LAPLACE, "kl_laplace")
    gap = (p1.loc - p2.loc).abs()
    return (p1.scale * (-gap / p1.scale).exp() + gap) / p2.scale \
        + (p2.scale / p1.scale).log() - 1.0


def kl_cauchy(p1: UnivariateFit, p2: UnivariateFit) -> Tensor:
    """KL(Cauchy(l1, g1) || Cauchy(l2, g2)), elementwise."""
    _check_pair(p1, p2, CAUCHY, "kl_cauchy")
    num = (p1.scale + p2.scale).square() + (p1.loc - p2.loc).square()
    return (num / (4.0 * p1.scale * p2.scale)).log()


def w2_gaussian_univariate(p1: UnivariateFit, p2: UnivariateFit) -> Tensor:
    """Squared 2-Wasserstein distance between univariate Gaussians, elementwise."""
    _check_pair(p1, p2, GAUSSIAN, "w2_gaussian_univariate")
    return (p1.loc - p2.loc).square() + (p1.scale - p2.scale).square()


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD matrix square root; negative eigenvalues clamp to 0."""
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T


def w2_gaussian_multivariate(p1: GaussianMultivariate,
                             p2: GaussianMultivariate) -> float:
    """Squared 2-Wasserstein distance between multivariate Gaussians.

    NumPy-only: this is the validation oracle for the per-dimension
    decomposition, not a training-path operation.
    """
    if p1.mean.shape != p2.mean.shape or p1.cov.shape != p2.cov.shape:
        raise ValueError(f"dimension mismatch: {p1.mean.shape} vs {p2.mean.shape}")
    delta = p1.mean - p2.mean
    root1 = _sqrtm_psd(p1.cov)
    cross = _sqrtm_psd(root1 @ p2.cov @ root1)
    return float(delta @ delta + np.trace(p1.cov + p2.cov - 2.0 * cross))


# Divergence selectors used by the regulariser: name -> (family, elementwise fn).
DIVERGENCES = {
    "gkl": (GAUSSIAN, kl_gaussian),
    "lkl": (LAPLACE, kl_laplace),
    "ckl": (CAUCHY, kl_cauchy),
    "gw": (GAUSSIAN, w2_gaussian_univariate),
}
