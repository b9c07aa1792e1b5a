import numpy as np
import pytest

from mcfrcl.autodiff import Tensor


def finite_diff(f, tensors, h=1e-5):
    """Central-difference gradients of scalar f() w.r.t. each tensor's data."""
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = f()
            flat[i] = orig - h
            lo = f()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * h)
        grads.append(g)
    return grads


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom))


def assert_grads_close(loss_fn, tensors, tol=1e-4, h=1e-5):
    """Compare reverse-mode gradients of loss_fn(tensors) with central diffs."""
    for t in tensors:
        t.zero_grad()
    loss = loss_fn()
    assert isinstance(loss, Tensor) and loss.ndim == 0
    loss.backward()
    numeric = finite_diff(lambda: loss_fn().item(), tensors, h=h)
    for t, num in zip(tensors, numeric):
        got = t.grad if t.grad is not None else np.zeros_like(t.data)
        assert rel_err(got, num) <= tol, \
            f"gradient mismatch: rel err {rel_err(got, num)}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
