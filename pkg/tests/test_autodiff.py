import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcfrcl.autodiff import (Tensor, categorical_log_likelihood,
                             differentiable_median, log_softmax,
                             sort_permutation)
from mcfrcl.errors import DomainError, ShapeMismatchError

from conftest import assert_grads_close, rel_err


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


class TestForward:
    def test_relu(self):
        out = Tensor([-1.0, 0.0, 2.0]).relu()
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])

    def test_matmul_matches_triple_loop(self, rng):
        a, b = rng.normal(size=(2, 3)), rng.normal(size=(3, 2))
        out = Tensor(a) @ Tensor(b)
        np.testing.assert_allclose(out.data, naive_matmul(a, b), atol=1e-12)

    def test_log_exp_inverse(self):
        x = np.array([0.5, -0.3])
        out = Tensor(x).exp().log()
        np.testing.assert_allclose(out.data, x, atol=1e-12)

    def test_softplus_at_zero(self):
        assert Tensor(0.0).softplus().item() == pytest.approx(np.log(2.0))

    def test_matmul_shape_error_names_op(self):
        with pytest.raises(ShapeMismatchError, match="matmul"):
            Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))

    def test_add_shape_error(self):
        with pytest.raises(ShapeMismatchError, match="add"):
            Tensor(np.ones(3)) + Tensor(np.ones(4))

    def test_log_domain_error(self):
        with pytest.raises(DomainError, match="log"):
            Tensor([-1.0]).log()

    def test_sqrt_domain_error(self):
        with pytest.raises(DomainError, match="sqrt"):
            Tensor([-1.0]).sqrt()


class TestBackward:
    def test_sum_of_squares(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        x.square().sum().backward()
        np.testing.assert_array_equal(x.grad, [2.0, 4.0, 6.0])

    def test_mean_relu_subgradient(self):
        x = Tensor([-1.0, 1.0], requires_grad=True)
        x.relu().mean().backward()
        np.testing.assert_array_equal(x.grad, [0.0, 0.5])

    def test_relu_at_zero_is_zero(self):
        x = Tensor([0.0], requires_grad=True)
        x.relu().sum().backward()
        assert x.grad[0] == 0.0

    def test_abs_at_zero_is_zero(self):
        x = Tensor([0.0], requires_grad=True)
        x.abs().sum().backward()
        assert x.grad[0] == 0.0

    def test_non_scalar_root_rejected(self):
        with pytest.raises(ValueError, match="scalar"):
            Tensor([1.0, 2.0], requires_grad=True).backward()

    def test_composite_matches_finite_differences(self, rng):
        x = Tensor(rng.normal(size=(3, 4)) + 3.0, requires_grad=True)
        w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        def loss():
            h = (x @ w).relu()
            return (h.square().mean() + x.log().sum() / 7.0).sqrt()
        assert_grads_close(loss, [x, w])

    def test_reductions_match_finite_differences(self, rng):
        x = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
        def loss():
            return (x.sum(axis=0).square().mean()
                    + x.mean(axis=1).abs().sum()
                    + x.exp().mean())
        assert_grads_close(loss, [x])

    def test_index_select_concat_transpose_grads(self, rng):
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        def loss():
            a = x.index_select(1, [0, 2, 2])
            b = Tensor.concatenate([a, x], axis=1)
            return b.square().sum() + (x.T @ x).sum()
        assert_grads_close(loss, [x])

    def test_maximum_splits_ties(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        y = Tensor([1.0, 0.0], requires_grad=True)
        x.maximum(y).sum().backward()
        np.testing.assert_array_equal(x.grad, [0.5, 1.0])
        np.testing.assert_array_equal(y.grad, [0.5, 0.0])

    def test_linearity_of_backward(self, rng):
        data = rng.normal(size=5)
        def grad_of(fn):
            x = Tensor(data.copy(), requires_grad=True)
            fn(x).backward()
            return x.grad
        l1 = lambda x: x.square().sum()
        l2 = lambda x: x.exp().mean()
        combined = grad_of(lambda x: 2.0 * l1(x) + 3.0 * l2(x))
        np.testing.assert_allclose(
            combined, 2.0 * grad_of(l1) + 3.0 * grad_of(l2), rtol=1e-12)

    def test_determinism(self, rng):
        data = rng.normal(size=(4, 4))
        results = []
        for _ in range(2):
            x = Tensor(data.copy(), requires_grad=True)
            loss = (x @ x).relu().mean()
            loss.backward()
            results.append((loss.item(), x.grad.copy()))
        assert results[0][0] == results[1][0]
        np.testing.assert_array_equal(results[0][1], results[1][1])

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, (6,), elements=st.floats(-5, 5,
                  allow_nan=False, allow_subnormal=False)))
    def test_property_softplus_square_grads(self, data):
        x = Tensor(data.copy(), requires_grad=True)
        assert_grads_close(lambda: x.softplus().square().sum(), [x], tol=1e-3)


class TestMedian:
    def test_odd_selection(self):
        x = Tensor([3.0, 1.0, 2.0], requires_grad=True)
        m = differentiable_median(x)
        assert m.item() == 2.0
        m.backward()
        np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])

    def test_even_mid_mean(self):
        x = Tensor([-1.0, 0.0, 1.0, 2.0], requires_grad=True)
        m = differentiable_median(x)
        assert m.item() == 0.5
        m.backward()
        np.testing.assert_array_equal(x.grad, [0.0, 0.5, 0.5, 0.0])

    def test_constant_ties(self):
        x = Tensor([4.0, 4.0, 4.0], requires_grad=True)
        m = differentiable_median(x)
        assert m.item() == 4.0
        m.backward()
        assert x.grad.sum() == 1.0

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            differentiable_median(Tensor(np.array([])))

    def test_axis_median_matches_numpy(self, rng):
        data = rng.normal(size=(7, 4, 3))
        out = Tensor(data).median(axis=0)
        np.testing.assert_allclose(out.data, np.median(data, axis=0), atol=1e-12)

    def test_axis_median_gradient(self, rng):
        x = Tensor(rng.normal(size=(6, 3)), requires_grad=True)
        assert_grads_close(lambda: (x.median(axis=0) * Tensor([1.0, 2.0, 3.0])).sum(), [x])


class TestSoftmaxLikelihood:
    def test_uniform_logits(self):
        logits = Tensor(np.zeros((4, 5)), requires_grad=True)
        ll = categorical_log_likelihood(logits, np.zeros(4, dtype=int))
        assert ll.item() == pytest.approx(-4 * np.log(5.0))

    def test_log_softmax_rows_normalise(self, rng):
        out = log_softmax(Tensor(rng.normal(size=(3, 6)) * 10))
        np.testing.assert_allclose(np.exp(out.data).sum(axis=1), 1.0, atol=1e-12)

    def test_gradient(self, rng):
        logits = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
        labels = np.array([0, 1, 2, 1, 0])
        assert_grads_close(
            lambda: categorical_log_likelihood(logits, labels), [logits])

    def test_label_out_of_range(self):
        with pytest.raises(DomainError, match="label"):
            categorical_log_likelihood(Tensor(np.zeros((2, 3))), np.array([0, 3]))


def test_sort_permutation_stable():
    idx = sort_permutation(Tensor([2.0, 1.0, 1.0, 0.0]))
    np.testing.assert_array_equal(idx, [3, 1, 2, 0])
