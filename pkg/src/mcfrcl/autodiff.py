"""Minimal reverse-mode autodiff on top of NumPy arrays.

A :class:`Tensor` wraps a float64 ndarray and records the operations applied
to it. Calling :meth:`Tensor.backward` on a scalar result walks the recorded
graph in reverse topological order and accumulates gradients on every tensor
created with ``requires_grad=True``.

Subgradient conventions at non-smooth points: relu'(0) = 0, abs'(0) = 0, the
median routes its gradient to the selected order statistic(s) with ties broken
by original index order (stable sort).
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, ShapeMismatchError

ArrayLike = Union[float, int, Sequence, np.ndarray, "Tensor"]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing NumPy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 array node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: Tuple[Tensor, ...] = ()
        self._backward = None

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def _wrap(x: ArrayLike) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    @staticmethod
    def _node(data: np.ndarray, parents: Tuple["Tensor", ...], backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- backward pass -------------------------------------------------------

    def backward(self) -> None:
        if self.data.ndim != 0:
            raise ValueError(f"backward requires a scalar root, got shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("backward called on an untracked tensor")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = _unbroadcast(np.asarray(grad, dtype=np.float64), self.data.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    # -- elementwise arithmetic ----------------------------------------------

    def _binary(self, other: ArrayLike, op: str, fwd, bwd) -> "Tensor":
        other = Tensor._wrap(other)
        try:
            data = fwd(self.data, other.data)
        except ValueError:
            raise ShapeMismatchError(op, self.shape, other.shape) from None
        def backward(grad):
            ga, gb = bwd(grad, self.data, other.data)
            if self.requires_grad:
                self._accumulate(ga)
            if other.requires_grad:
                other._accumulate(gb)
        return Tensor._node(data, (self, other), backward)

    def __add__(self, other):
        return self._binary(other, "add", np.add, lambda g, a, b: (g, g))

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, "subtract", np.subtract, lambda g, a, b: (g, -g))

    def __rsub__(self, other):
        return Tensor._wrap(other) - self

    def __mul__(self, other):
        return self._binary(other, "multiply", np.multiply,
                            lambda g, a, b: (g * b, g * a))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, "divide", np.divide,
                            lambda g, a, b: (g / b, -g * a / (b * b)))

    def __rtruediv__(self, other):
        return Tensor._wrap(other) / self

    def __neg__(self):
        def backward(grad):
            self._accumulate(-grad)
        return Tensor._node(-self.data, (self,), backward)

    def maximum(self, other: ArrayLike) -> "Tensor":
        """Elementwise max; ties split the gradient 0.5/0.5."""
        def bwd(g, a, b):
            a_b, b_b = np.broadcast_arrays(a, b)
            ga = np.where(a_b > b_b, g, np.where(a_b == b_b, 0.5 * g, 0.0))
            gb = np.where(b_b > a_b, g, np.where(a_b == b_b, 0.5 * g, 0.0))
            return ga, gb
        return self._binary(other, "maximum", np.maximum, bwd)

    # -- elementwise functions -----------------------------------------------

    def relu(self) -> "Tensor":
        def backward(grad):
            self._accumulate(grad * (self.data > 0))
        return Tensor._node(np.maximum(self.data, 0.0), (self,), backward)

    def exp(self) -> "Tensor":
        data = np.exp(self.data)
        def backward(grad):
            self._accumulate(grad * data)
        return Tensor._node(data, (self,), backward)

    def log(self) -> "Tensor":
        if np.any(self.data <= 0):
            raise DomainError("log", "argument must be strictly positive")
        def backward(grad):
            self._accumulate(grad / self.data)
        return Tensor._node(np.log(self.data), (self,), backward)

    def sqrt(self) -> "Tensor":
        if np.any(self.data < 0):
            raise DomainError("sqrt", "argument must be non-negative")
        data = np.sqrt(self.data)
        def backward(grad):
            self._accumulate(grad * 0.5 / data)
        return Tensor._node(data, (self,), backward)

    def square(self) -> "Tensor":
        def backward(grad):
            self._accumulate(grad * 2.0 * self.data)
        return Tensor._node(np.square(self.data), (self,), backward)

    def abs(self) -> "Tensor":
        def backward(grad):
            self._accumulate(grad * np.sign(self.data))
        return Tensor._node(np.abs(self.data), (self,), backward)

    def softplus(self) -> "Tensor":
        data = np.logaddexp(0.0, self.data)
        def backward(grad):
            # d/dx log(1+e^x) = sigmoid(x), computed overflow-safe
            self._accumulate(grad * 0.5 * (1.0 + np.tanh(0.5 * self.data)))
        return Tensor._node(data, (self,), backward)

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        data = self.data.sum(axis=axis, keepdims=keepdims)
        def backward(grad):
            g = np.asarray(grad)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.data.shape))
        return Tensor._node(data, (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(n)

    def median(self, axis: int = 0) -> "Tensor":
        """Sample median along `axis` (mid-mean for even counts).

        The gradient is routed to the selected order statistic(s): the single
        middle entry for odd counts, 0.5 to each of the two middle entries for
        even counts. Ties resolve to the earliest original index (stable sort).
        """
        n = self.data.shape[axis] if self.data.ndim else self.data.size
        if n == 0:
            raise DomainError("median", "empty input")
        if self.data.ndim == 0:
            raise DomainError("median", "scalar input")
        perm = np.argsort(self.data, axis=axis, kind="stable")
        mid_hi = n // 2
        hi_idx = np.take(perm, [mid_hi], axis=axis)
        hi = np.take_along_axis(self.data, hi_idx, axis=axis)
        if n % 2 == 1:
            data = np.squeeze(hi, axis=axis)
            picks = [(hi_idx, 1.0)]
        else:
            lo_idx = np.take(perm, [mid_hi - 1], axis=axis)
            lo = np.take_along_axis(self.data, lo_idx, axis=axis)
            data = np.squeeze(0.5 * (lo + hi), axis=axis)
            picks = [(lo_idx, 0.5), (hi_idx, 0.5)]
        def backward(grad):
            g = np.expand_dims(np.asarray(grad, dtype=np.float64), axis)
            out = np.zeros_like(self.data)
            for idx, w in picks:
                scattered = np.zeros_like(self.data)
                np.put_along_axis(scattered, idx, w * g, axis=axis)
                out += scattered
            self._accumulate(out)
        return Tensor._node(data, (self,), backward)

    # -- shape ops -----------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        data = self.data.reshape(*shape)
        def backward(grad):
            self._accumulate(np.asarray(grad).reshape(self.data.shape))
        return Tensor._node(data, (self,), backward)

    def transpose(self) -> "Tensor":
        if self.data.ndim != 2:
            raise ShapeMismatchError("transpose", self.shape)
        def backward(grad):
            self._accumulate(np.asarray(grad).T)
        return Tensor._node(self.data.T.copy(), (self,), backward)

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def broadcast_to(self, shape) -> "Tensor":
        try:
            data = np.broadcast_to(self.data, shape)
        except ValueError:
            raise ShapeMismatchError("broadcast", self.shape, shape) from None
        def backward(grad):
            self._accumulate(grad)
        return Tensor._node(data.copy(), (self,), backward)

    def index_select(self, axis: int, indices) -> "Tensor":
        indices = np.asarray(indices, dtype=np.intp)
        data = np.take(self.data, indices, axis=axis)
        def backward(grad):
            out = np.zeros_like(self.data)
            moved = np.moveaxis(out, axis, 0)
            np.add.at(moved, indices, np.moveaxis(np.asarray(grad), axis, 0))
            self._accumulate(out)
        return Tensor._node(data, (self,), backward)

    @staticmethod
    def concatenate(tensors: Iterable["Tensor"], axis: int = 0) -> "Tensor":
        tensors = [Tensor._wrap(t) for t in tensors]
        data = np.concatenate([t.data for t in tensors], axis=axis)
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)
        def backward(grad):
            grad = np.asarray(grad)
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    sl = [slice(None)] * grad.ndim
                    sl[axis] = slice(lo, hi)
                    t._accumulate(grad[tuple(sl)])
        return Tensor._node(data, tuple(tensors), backward)

    # -- linear algebra ------------------------------------------------------

    def matmul(self, other: ArrayLike) -> "Tensor":
        other = Tensor._wrap(other)
        if self.data.ndim != 2 or other.data.ndim != 2 \
                or self.data.shape[1] != other.data.shape[0]:
            raise ShapeMismatchError("matmul", self.shape, other.shape)
        data = self.data @ other.data
        def backward(grad):
            if self.requires_grad:
                self._accumulate(grad @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ grad)
        return Tensor._node(data, (self, other), backward)

    __matmul__ = matmul


def log_softmax(logits: Tensor) -> Tensor:
    """Row-wise log-softmax of a (batch, classes) tensor, overflow-safe."""
    if logits.ndim != 2:
        raise ShapeMismatchError("log_softmax", logits.shape)
    x = logits.data
    m = x.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(x - m).sum(axis=1, keepdims=True))
    data = x - lse
    def backward(grad):
        grad = np.asarray(grad)
        logits._accumulate(grad - np.exp(data) * grad.sum(axis=1, keepdims=True))
    return Tensor._node(data, (logits,), backward)


def categorical_log_likelihood(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Sum over the batch of log p(label | logits) under a softmax likelihood."""
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatchError("categorical_log_likelihood", logits.shape, labels.shape)
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise DomainError("categorical_log_likelihood",
                          f"label out of range for {logits.shape[1]} classes")
    lsm = log_softmax(logits)
    rows = np.arange(logits.shape[0])
    x = lsm.data[rows, labels]
    def backward(grad):
        out = np.zeros_like(lsm.data)
        out[rows, labels] = np.asarray(grad)
        lsm._accumulate(out)
    per_example = Tensor._node(x, (lsm,), backward)
    return per_example.sum()


def sort_permutation(x: Tensor, axis: int = -1) -> np.ndarray:
    """Stable sort indices of the values; a plain (non-differentiable) array."""
    return np.argsort(x.data, axis=axis, kind="stable")


def differentiable_median(x: Tensor) -> Tensor:
    """Median of a 1-D tensor; see :meth:`Tensor.median` for the subgradient."""
    if x.ndim != 1 or x.size == 0:
        raise DomainError("median", "requires a non-empty vector")
    return x.median(axis=0)
