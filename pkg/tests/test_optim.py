import numpy as np
import pytest

from stgate.errors import ContractError, OptimizerError
from stgate.optim import ParamStore, Rng, adam_step, backward, grad_check, xavier_init
from stgate.tensor import Tensor, matmul, sigmoid, softmax_rows


class TestRng:
    def test_same_seed_same_stream(self):
        a = Rng(42).normal(0.0, 1.0, 100)
        b = Rng(42).normal(0.0, 1.0, 100)
        assert np.array_equal(a, b)

    def test_children_are_independent(self):
        root = Rng(42)
        a = root.child(0).normal(0.0, 1.0, 10)
        b = root.child(1).normal(0.0, 1.0, 10)
        assert not np.array_equal(a, b)
        assert np.array_equal(a, Rng(42, spawn_key=(0,)).normal(0.0, 1.0, 10))


class TestXavierInit:
    def test_bounds_hold(self):
        t = xavier_init(Rng(0), (20, 50))
        bound = np.sqrt(6.0 / 70.0)
        assert np.all(np.abs(t.data) <= bound)

    def test_seed_determinism(self):
        assert np.array_equal(xavier_init(Rng(3), (8, 8)).data, xavier_init(Rng(3), (8, 8)).data)

    def test_sample_mean_within_three_sigma(self):
        t = xavier_init(Rng(11), (40, 25))  # 1000 samples
        bound = np.sqrt(6.0 / 65.0)
        sigma_mean = bound / np.sqrt(3.0) / np.sqrt(1000.0)
        assert abs(t.data.mean()) < 3.0 * sigma_mean

    def test_rejects_non_2d(self):
        with pytest.raises(ContractError):
            xavier_init(Rng(0), (4,))


class TestParamStore:
    def test_duplicate_name_rejected(self):
        params = ParamStore()
        params.add("w", np.zeros(2))
        with pytest.raises(ContractError):
            params.add("w", np.zeros(2))

    def test_zero_grads_is_exact(self):
        params = ParamStore()
        w = params.add("w", np.ones(4))
        w.grad = np.full(4, 0.3)
        params.zero_grads()
        assert np.array_equal(w.grad, np.zeros(4))

    def test_grad_shape_matches_value(self):
        params = ParamStore()
        w = params.add("w", np.ones((3, 2)))
        assert w.grad.shape == w.shape


class TestAdam:
    def test_zero_gradient_no_motion(self):
        params = ParamStore()
        w = params.add("w", np.array([1.0, -2.0]))
        params.zero_grads()
        adam_step(params)
        assert np.array_equal(w.data, [1.0, -2.0])

    def test_first_step_is_signed_lr(self):
        params = ParamStore()
        w = params.add("w", np.zeros(3))
        w.grad = np.array([0.5, -2.0, 3.0])
        adam_step(params, lr=1e-3)
        assert np.allclose(w.data, [-1e-3, 1e-3, -1e-3], atol=1e-8)
        assert params.step_count == 1

    def test_trajectory_bit_identical(self):
        def run():
            rng = Rng(9)
            params = ParamStore()
            w = params.add("w", xavier_init(rng, (4, 3)))
            x = Tensor(rng.normal(0.0, 1.0, (6, 4)))
            for _ in range(5):
                loss = (sigmoid(matmul(x, w)) ** 2.0).mean()
                params.zero_grads()
                backward(loss, params)
                adam_step(params)
            return w.data.copy()

        assert np.array_equal(run(), run())

    def test_non_finite_gradient_aborts_naming_param(self):
        params = ParamStore()
        a = params.add("alpha", np.ones(2))
        b = params.add("beta", np.ones(2))
        params.zero_grads()
        a.grad = np.array([1.0, 1.0])
        b.grad = np.array([np.nan, 0.0])
        before = a.data.copy()
        with pytest.raises(OptimizerError, match="beta"):
            adam_step(params)
        # abort means no partial update either
        assert np.array_equal(a.data, before)
        assert params.step_count == 0


class TestGradCheck:
    def test_linear_nearly_exact(self):
        params = ParamStore()
        w = params.add("w", Rng(1).normal(0.0, 1.0, (4, 2)))
        c = Tensor(Rng(2).normal(0.0, 1.0, (4, 2)))

        def f():
            return (w * c).sum()

        # no truncation term for a linear map, so a larger step only
        # shrinks the cancellation noise
        report = grad_check(f, params, step=1e-3, tol=1e-10)
        assert report.passed
        assert report.max_rel_err < 1e-10

    def test_sigmoid_chain(self):
        rng = Rng(3)
        params = ParamStore()
        w = params.add("w", xavier_init(rng, (5, 4)))
        x = Tensor(rng.normal(0.0, 1.0, (7, 5)))

        def f():
            return (sigmoid(matmul(x, w)) ** 2.0).mean()

        report = grad_check(f, params, step=1e-5, tol=1e-6)
        assert report.passed, report.summary()

    def test_softmax_composite(self):
        rng = Rng(4)
        params = ParamStore()
        w = params.add("w", xavier_init(rng, (3, 3)))
        x = Tensor(rng.normal(0.0, 1.0, (5, 3)))

        def f():
            s = softmax_rows(matmul(x, w))
            return (s * s).sum()

        assert grad_check(f, params, step=1e-5, tol=1e-6).passed

    def test_detects_corrupted_gradient_rule(self):
        # fault injection: an op whose backward rule is deliberately wrong
        params = ParamStore()
        w = params.add("w_broken", np.array([0.7, -0.4]))
        c = Tensor(np.array([2.0, 3.0]))

        def wrong_square(t):
            from stgate.tensor import _make_op

            return _make_op(t.data * t.data, (t,), lambda g: [g * t.data])  # missing factor 2

        def f():
            return (wrong_square(w) * c).sum()

        report = grad_check(f, params, step=1e-5, tol=1e-4)
        assert not report.passed
        assert "w_broken" in report.failures()

    def test_requires_double_precision(self):
        params = ParamStore()
        params.add("w", np.zeros(2, dtype=np.float32))
        with pytest.raises(ContractError):
            grad_check(lambda: Tensor(0.0), params)

    def test_flags_non_finite_perturbation(self):
        from stgate.tensor import tlog

        params = ParamStore()
        w = params.add("w", np.array([5e-6]))  # step below zero crosses log's domain

        def f():
            return tlog(w).sum()

        with np.errstate(invalid="ignore", divide="ignore"):
            report = grad_check(f, params, step=1e-5, tol=1e-4)
        assert report.flagged
        assert not report.passed
