"""Sequential task training loop with the MC functional-regularised objective.

Per task: shuffle, iterate minibatches maximizing
    (1/S_batch) sum_i log p(y | f_i)  -  lam * sum_tau (N_batch/N_context) * D[...]
then store a coreset sampled from the task's training inputs and freeze a
snapshot of the variational parameters for use as the next task's "previous
model". Task 1 regularises against the analytic functional prior instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .autodiff import Tensor, categorical_log_likelihood
from .bnn import (Architecture, ModelSnapshot, VariationalParams,
                  _named_tensors, forward, predict_mc, sample_weights)
from .data import TaskBundle
from .errors import ConfigError
from .regularizer import (ContextSource, CoresetContextSource,
                          PriorContextSource, total_regulariser)
from .seeding import derive_rng


@dataclass
class TrainConfig:
    divergence: str = "gw"
    lam: float = 0.01
    epochs: int = 10
    n_batch: int = 128          # N_beta
    n_context: int = 40         # N_C_tau
    s_batch: int = 30           # S_beta: weight samples for the likelihood
    s_context: int = 30         # S_C: weight samples for the regulariser
    coreset_size: int = 40
    lr: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    head_mode: str = "single"
    prior_magnitude: float = 0.001

    def __post_init__(self):
        if self.divergence not in ("gkl", "lkl", "ckl", "gw"):
            raise ConfigError(f"unknown divergence {self.divergence!r}")
        if self.lam < 0:
            raise ConfigError("lam must be non-negative")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        for name in ("epochs", "n_batch", "n_context", "s_batch",
                     "s_context", "coreset_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")


class Adam:
    """Standard Adam with bias correction; one shared step counter."""

    def __init__(self, params: List[Tensor], names: List[str],
                 lr: float, beta1: float, beta2: float, eps: float):
        self.params = params
        self.names = names
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(
                    f"non-finite gradient in parameter block {self.names[i]}")
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1 - self.beta2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


@dataclass
class EpochLog:
    task: int
    epoch: int
    data_term: float
    reg_term: float
    wall_ms: float


def likelihood_term(model: VariationalParams, x: np.ndarray, y: np.ndarray,
                    head: int, n_samples: int,
                    rng: np.random.Generator) -> Tensor:
    """MC mean over weight samples of the batch-summed categorical log-lik."""
    if len(x) == 0:
        raise ValueError("empty batch")
    total = Tensor(0.0)
    for _ in range(n_samples):
        net = sample_weights(model, rng)
        logits = forward(net, x, head=head)
        total = total + categorical_log_likelihood(logits, y)
    return total / float(n_samples)


class ContinualTrainer:
    """Owns the live model, the previous-task snapshot, and the coreset store."""

    def __init__(self, arch: Architecture, config: TrainConfig):
        if arch.head_mode != config.head_mode:
            raise ConfigError("architecture/config head modes differ")
        self.arch = arch
        self.config = config
        self.model = VariationalParams.init(
            arch, derive_rng(config.seed, "init"))
        self.snapshot: Optional[ModelSnapshot] = None
        self.coresets: List[np.ndarray] = []
        self.task_outputs: List[int] = []
        self.completed = 0
        self.global_step = 0
        names = [n for n, _ in _named_tensors(self.model)]
        self.adam = Adam(self.model.trainables(), names, config.lr,
                         config.beta1, config.beta2, config.eps)
        self.epoch_logs: List[EpochLog] = []

    # -- objective -----------------------------------------------------------

    def context_sources(self, current_task: int) -> List[ContextSource]:
        if current_task == 0:
            return [PriorContextSource(
                task=0, input_dim=self.arch.input_dim,
                n_outputs=self.arch.head_sizes[0],
                magnitude=self.config.prior_magnitude)]
        return [CoresetContextSource(tau, self.coresets[tau],
                                     self.task_outputs[tau])
                for tau in range(current_task)]

    def objective(self, x: np.ndarray, y: np.ndarray, task: int,
                  step: int) -> tuple:
        """(objective to maximize, data term value, reg term value)."""
        cfg = self.config
        data_term = likelihood_term(
            self.model, x, y, task, cfg.s_batch,
            derive_rng(cfg.seed, "likelihood", task, step))
        if cfg.lam == 0:
            return data_term, data_term.item(), 0.0
        reg = total_regulariser(
            self.model, self.snapshot, self.context_sources(task),
            cfg.divergence, cfg.s_context, cfg.lam, len(x),
            cfg.n_context, cfg.seed, step)
        return data_term - reg, data_term.item(), reg.item()

    # -- training ------------------------------------------------------------

    def train_task(self, task: TaskBundle) -> List[EpochLog]:
        cfg = self.config
        if task.task_id != self.completed:
            raise ValueError(
                f"tasks must arrive in order: expected {self.completed}, "
                f"got {task.task_id}")
        logs = []
        n = len(task.x_train)
        for epoch in range(cfg.epochs):
            start = time.perf_counter()
            perm = derive_rng(cfg.seed, "shuffle", task.task_id,
                              epoch).permutation(n)
            data_terms, reg_terms = [], []
            for lo in range(0, n, cfg.n_batch):
                idx = perm[lo:lo + cfg.n_batch]
                obj, data_val, reg_val = self.objective(
                    task.x_train[idx], task.y_train[idx],
                    task.task_id, self.global_step)
                loss = -obj
                self.adam.zero_grad()
                loss.backward()
                self.adam.step()
                self.global_step += 1
                data_terms.append(data_val)
                reg_terms.append(reg_val)
            logs.append(EpochLog(
                task=task.task_id, epoch=epoch,
                data_term=float(np.mean(data_terms)),
                reg_term=float(np.mean(reg_terms)),
                wall_ms=(time.perf_counter() - start) * 1e3))
        rng = derive_rng(cfg.seed, "coreset", task.task_id)
        size = min(cfg.coreset_size, n)
        pick = rng.choice(n, size=size, replace=False)
        self.coresets.append(task.x_train[pick].copy())
        self.task_outputs.append(task.n_outputs)
        self.snapshot = self.model.snapshot()
        self.completed += 1
        self.epoch_logs.extend(logs)
        return logs

    def evaluate(self, task: TaskBundle, n_samples: Optional[int] = None) -> float:
        """Test accuracy via MC-averaged predictions; argmax ties -> lowest index."""
        if task.task_id >= self.completed:
            raise ValueError(f"task {task.task_id} has not been trained yet")
        if len(task.x_test) == 0:
            raise ValueError("empty test set")
        n_samples = n_samples or self.config.s_batch
        rng = derive_rng(self.config.seed, "eval", self.completed, task.task_id)
        probs = predict_mc(self.model, task.x_test, task.task_id,
                           n_samples, rng)
        return float(np.mean(probs.argmax(axis=1) == task.y_test))
