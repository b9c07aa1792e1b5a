"""Mean-field Gaussian variational MLP with single- or multi-head outputs.

Each weight has a trainable mean and a trainable raw-variance parameter rho;
the standard deviation is softplus(rho). Concrete networks are drawn with the
reparameterization trick (theta = mean + sigma * eps), so a loss evaluated on
a sampled network is differentiable with respect to both means and rhos.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from .autodiff import Tensor
from .errors import ShapeMismatchError

# softplus(INIT_RHO) == 0.05: small initial sigma keeps early MC predictions tame
INIT_SIGMA = 0.05
SINGLE_HEAD = "single"
MULTI_HEAD = "multi"


@dataclass
class Architecture:
    """Layer sizes and output-head layout of the variational MLP."""

    input_dim: int
    hidden: Sequence[int]
    head_sizes: Sequence[int]  # output dims per task
    head_mode: str = SINGLE_HEAD

    def __post_init__(self):
        if not self.hidden:
            raise ValueError("at least one hidden layer is required")
        if self.head_mode not in (SINGLE_HEAD, MULTI_HEAD):
            raise ValueError(f"unknown head mode {self.head_mode!r}")
        if any(d < 1 for d in self.head_sizes):
            raise ValueError("head sizes must be positive")

    @property
    def n_tasks(self) -> int:
        return len(self.head_sizes)

    def head_columns(self, task: int) -> np.ndarray:
        """Global output indices of one task's head (single-head layout)."""
        if not 0 <= task < self.n_tasks:
            raise ValueError(f"unknown head {task}")
        offset = int(sum(self.head_sizes[:task]))
        return np.arange(offset, offset + self.head_sizes[task])


@dataclass
class _LinearVar:
    """Variational parameters of one dense layer."""

    w_mu: Tensor
    w_rho: Tensor
    b_mu: Tensor
    b_rho: Tensor

    def tensors(self) -> List[Tensor]:
        return [self.w_mu, self.w_rho, self.b_mu, self.b_rho]


def _init_linear(fan_in: int, fan_out: int, rng: np.random.Generator,
                 trainable: bool) -> _LinearVar:
    rho0 = float(np.log(np.expm1(INIT_SIGMA)))
    w_mu = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
    return _LinearVar(
        w_mu=Tensor(w_mu, requires_grad=trainable),
        w_rho=Tensor(np.full((fan_in, fan_out), rho0), requires_grad=trainable),
        b_mu=Tensor(np.zeros(fan_out), requires_grad=trainable),
        b_rho=Tensor(np.full(fan_out, rho0), requires_grad=trainable),
    )


@dataclass
class VariationalParams:
    """All trainable tensors of the model: hidden stack plus output head(s)."""

    arch: Architecture
    hidden: List[_LinearVar]
    heads: List[_LinearVar]  # one entry in single-head mode

    @classmethod
    def init(cls, arch: Architecture, rng: np.random.Generator,
             trainable: bool = True) -> "VariationalParams":
        sizes = [arch.input_dim, *arch.hidden]
        hidden = [_init_linear(sizes[i], sizes[i + 1], rng, trainable)
                  for i in range(len(sizes) - 1)]
        last = sizes[-1]
        if arch.head_mode == SINGLE_HEAD:
            heads = [_init_linear(last, int(sum(arch.head_sizes)), rng, trainable)]
        else:
            heads = [_init_linear(last, int(d), rng, trainable)
                     for d in arch.head_sizes]
        return cls(arch, hidden, heads)

    def layers(self) -> List[_LinearVar]:
        return [*self.hidden, *self.heads]

    def trainables(self) -> List[Tensor]:
        return [t for layer in self.layers() for t in layer.tensors()]

    def head_trainables(self, task: int) -> List[Tensor]:
        if self.arch.head_mode == SINGLE_HEAD:
            return self.heads[0].tensors()
        return self.heads[task].tensors()

    def snapshot(self) -> "ModelSnapshot":
        """Frozen constant copy of the current parameters."""
        def freeze(l: _LinearVar) -> _LinearVar:
            return _LinearVar(*(Tensor(t.data.copy()) for t in l.tensors()))
        frozen = VariationalParams(self.arch,
                                   [freeze(l) for l in self.hidden],
                                   [freeze(l) for l in self.heads])
        return ModelSnapshot(frozen)


@dataclass(frozen=True)
class ModelSnapshot:
    """Immutable parameters of the model at the end of the previous task."""

    params: VariationalParams


@dataclass
class SampledNet:
    """One concrete weight draw: (W, b) per hidden layer and per head."""

    arch: Architecture
    hidden: List[tuple]
    heads: List[tuple]


def sample_weights(params: VariationalParams,
                   rng: np.random.Generator) -> SampledNet:
    """Draw theta = mu + softplus(rho) * eps for every weight block."""
    def draw(l: _LinearVar) -> tuple:
        w_eps = rng.standard_normal(l.w_mu.shape)
        b_eps = rng.standard_normal(l.b_mu.shape)
        w = l.w_mu + l.w_rho.softplus() * Tensor(w_eps)
        b = l.b_mu + l.b_rho.softplus() * Tensor(b_eps)
        return w, b
    return SampledNet(params.arch,
                      [draw(l) for l in params.hidden],
                      [draw(l) for l in params.heads])


def forward(net: SampledNet, x: Union[Tensor, np.ndarray],
            head: Optional[int] = None) -> Tensor:
    """Logits of a sampled network on a batch, restricted to one head.

    head=None returns the full shared output block (single-head mode only).
    """
    x = Tensor._wrap(x)
    if x.ndim != 2 or x.shape[1] != net.arch.input_dim:
        raise ShapeMismatchError("forward", x.shape, (-1, net.arch.input_dim))
    for w, b in net.hidden:
        x = (x @ w + b).relu()
    if net.arch.head_mode == SINGLE_HEAD:
        w, b = net.heads[0]
        logits = x @ w + b
        if head is None:
            return logits
        return logits.index_select(1, net.arch.head_columns(head))
    if head is None or not 0 <= head < len(net.heads):
        raise ValueError(f"unknown head {head}")
    w, b = net.heads[head]
    return x @ w + b


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict_mc(params: VariationalParams, x: np.ndarray, head: int,
               n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Mean softmax probabilities over `n_samples` weight draws."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    acc = None
    for _ in range(n_samples):
        net = sample_weights(params, rng)
        probs = _softmax(forward(net, x, head).data)
        acc = probs if acc is None else acc + probs
    return acc / n_samples


# -- parameter serialization: flat little-endian f64 stream + JSON sidecar ----

def _named_tensors(params: VariationalParams):
    for i, l in enumerate(params.hidden):
        for attr in ("w_mu", "w_rho", "b_mu", "b_rho"):
            yield f"hidden{i}.{attr}", getattr(l, attr)
    for i, l in enumerate(params.heads):
        for attr in ("w_mu", "w_rho", "b_mu", "b_rho"):
            yield f"head{i}.{attr}", getattr(l, attr)


def save_params(params: VariationalParams, prefix: Union[str, Path]) -> None:
    """Write `<prefix>.bin` (flat <f8 values) and `<prefix>.json` (schema)."""
    prefix = Path(prefix)
    entries = []
    blobs = []
    for name, t in _named_tensors(params):
        entries.append({"name": name, "shape": list(t.shape)})
        blobs.append(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    sidecar = {
        "dtype": "<f8",
        "input_dim": params.arch.input_dim,
        "hidden": list(params.arch.hidden),
        "head_sizes": list(params.arch.head_sizes),
        "head_mode": params.arch.head_mode,
        "entries": entries,
    }
    prefix.with_suffix(".bin").write_bytes(b"".join(blobs))
    prefix.with_suffix(".json").write_text(
        json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")


def load_params(prefix: Union[str, Path], trainable: bool = True) -> VariationalParams:
    prefix = Path(prefix)
    sidecar = json.loads(prefix.with_suffix(".json").read_text(encoding="utf-8"))
    raw = np.frombuffer(prefix.with_suffix(".bin").read_bytes(), dtype="<f8")
    arch = Architecture(sidecar["input_dim"], sidecar["hidden"],
                        sidecar["head_sizes"], sidecar["head_mode"])
    params = VariationalParams.init(arch, np.random.default_rng(0), trainable)
    offset = 0
    tensors = dict(_named_tensors(params))
    for entry in sidecar["entries"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        block = raw[offset:offset + size].reshape(entry["shape"])
        tensors[entry["name"]].data = block.astype(np.float64).copy()
        offset += size
    if offset != raw.size:
        raise ValueError(f"parameter stream length mismatch: {offset} != {raw.size}")
    return params
