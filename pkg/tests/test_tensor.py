import math

import numpy as np
import pytest

from stgate.errors import ContractError, ShapeError
from stgate.optim import ParamStore, Rng, backward
from stgate.tensor import (
    Tensor,
    concat_lastdim,
    gelu,
    layer_norm,
    matmul,
    relu,
    sigmoid,
    softmax_rows,
    tanh,
)


class TestMatmul:
    def test_identity(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        out = matmul(Tensor(np.eye(2)), a)
        assert np.array_equal(out.data, a.data)

    def test_zero_operand(self):
        out = matmul(Tensor(np.zeros((2, 3))), Tensor(np.arange(12.0).reshape(3, 4)))
        assert out.shape == (2, 4)
        assert np.all(out.data == 0.0)

    def test_hand_case(self):
        out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0, 6.0], [7.0, 8.0]]))
        assert np.array_equal(out.data, [[19.0, 22.0], [43.0, 50.0]])

    def test_inner_mismatch_names_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 5\)"):
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))

    def test_batched_weight_gradient(self):
        # [B, m, k] @ [k, n] takes the collapsed-gemm backward path
        rng = Rng(3)
        a = Tensor(rng.normal(0.0, 1.0, (4, 3, 2)))
        w = Tensor(rng.normal(0.0, 1.0, (2, 5)), requires_grad=True)
        out = matmul(a, w)
        out.backward(np.ones(out.shape))
        expected = a.data.reshape(-1, 2).T @ np.ones((12, 5))
        assert np.allclose(w.grad, expected)

    def test_broadcast_left_operand_gradient(self):
        # [N, N] @ [T, N, d]: gradient on the left sums over the batch axis
        rng = Rng(4)
        a = Tensor(rng.normal(0.0, 1.0, (3, 3)), requires_grad=True)
        h = Tensor(rng.normal(0.0, 1.0, (5, 3, 2)))
        out = matmul(a, h)
        g = rng.normal(0.0, 1.0, out.shape)
        out.backward(g)
        expected = sum(g[t] @ h.data[t].T for t in range(5))
        assert np.allclose(a.grad, expected)


class TestSigmoid:
    def test_zero(self):
        assert sigmoid(Tensor(0.0)).item() == 0.5

    def test_symmetry(self):
        x = Rng(1).normal(0.0, 3.0, 50)
        total = sigmoid(Tensor(x)).data + sigmoid(Tensor(-x)).data
        assert np.allclose(total, 1.0, atol=1e-15)

    def test_ln3(self):
        assert sigmoid(Tensor(math.log(3.0))).item() == pytest.approx(0.75, abs=1e-15)

    def test_extreme_inputs_stay_finite(self):
        out = sigmoid(Tensor([-1e4, 1e4])).data
        assert np.isfinite(out).all()


class TestSoftmaxRows:
    def test_constant_row_uniform(self):
        out = softmax_rows(Tensor(np.full((3, 5), 2.7)))
        assert np.allclose(out.data, 0.2, atol=1e-15)

    def test_ln2_row(self):
        out = softmax_rows(Tensor([[0.0, math.log(2.0)]]))
        assert np.allclose(out.data, [[1.0 / 3.0, 2.0 / 3.0]], atol=1e-15)

    def test_dominant_entry(self):
        row = np.zeros((1, 4))
        row[0, 2] = 50.0
        out = softmax_rows(Tensor(row))
        assert out.data[0, 2] >= 1.0 - 1e-9

    def test_rows_sum_to_one(self):
        x = Rng(2).normal(0.0, 10.0, (20, 7))
        out = softmax_rows(Tensor(x))
        assert np.abs(out.data.sum(axis=-1) - 1.0).max() <= 1e-9


class TestConcatLastDim:
    def test_scalar_vectors(self):
        out = concat_lastdim(Tensor([1.0]), Tensor([2.0]))
        assert np.array_equal(out.data, [1.0, 2.0])

    def test_empty_identity(self):
        a = Tensor(np.arange(6.0).reshape(2, 3))
        out = concat_lastdim(a, Tensor(np.zeros((2, 0))))
        assert np.array_equal(out.data, a.data)

    def test_shape_arithmetic(self):
        out = concat_lastdim(Tensor(np.zeros((3, 2))), Tensor(np.zeros((3, 5))))
        assert out.shape == (3, 7)

    def test_leading_mismatch(self):
        with pytest.raises(ShapeError):
            concat_lastdim(Tensor(np.zeros((3, 2))), Tensor(np.zeros((4, 2))))

    def test_gradient_splits(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        b = Tensor(np.ones((2, 3)), requires_grad=True)
        out = concat_lastdim(a, b)
        g = np.arange(10.0).reshape(2, 5)
        out.backward(g)
        assert np.array_equal(a.grad, g[:, :2])
        assert np.array_equal(b.grad, g[:, 2:])


class TestLayerNorm:
    def test_constant_vector_zeros(self):
        out = layer_norm(Tensor(np.full((4,), 3.3)), Tensor(np.ones(4)), Tensor(np.zeros(4)))
        assert np.allclose(out.data, 0.0, atol=1e-7)

    def test_already_normalized(self):
        out = layer_norm(Tensor([1.0, -1.0]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12)
        assert np.allclose(out.data, [1.0, -1.0], atol=1e-9)

    def test_output_statistics(self):
        x = Rng(5).normal(1.5, 3.0, (10, 16))
        out = layer_norm(Tensor(x), Tensor(np.ones(16)), Tensor(np.zeros(16)), eps=1e-10)
        assert np.abs(out.data.mean(axis=-1)).max() <= 1e-6
        assert np.abs(out.data.var(axis=-1) - 1.0).max() <= 1e-6

    def test_bad_gain_shape(self):
        with pytest.raises(ShapeError):
            layer_norm(Tensor(np.zeros((2, 4))), Tensor(np.ones(3)), Tensor(np.zeros(4)))


class TestBackward:
    def test_sum_gradient_is_ones(self):
        w = Tensor(Rng(6).normal(0.0, 1.0, (3, 4)), requires_grad=True)
        w.zero_grad()
        w.sum().backward()
        assert np.array_equal(w.grad, np.ones((3, 4)))

    def test_half_norm_gradient_is_value(self):
        w = Tensor(Rng(7).normal(0.0, 1.0, (5,)), requires_grad=True)
        w.zero_grad()
        ((w * w).sum() * 0.5).backward()
        assert np.allclose(w.grad, w.data, atol=1e-15)

    def test_gradients_accumulate_until_zeroed(self):
        w = Tensor(np.ones(3), requires_grad=True)
        w.zero_grad()
        w.sum().backward()
        w.sum().backward()
        assert np.array_equal(w.grad, np.full(3, 2.0))
        w.zero_grad()
        assert np.array_equal(w.grad, np.zeros(3))

    def test_non_scalar_loss_rejected(self):
        params = ParamStore()
        w = params.add("w", np.ones(3))
        with pytest.raises(ContractError):
            backward(w * 2.0, params)

    def test_shared_subexpression_counted_twice(self):
        x = Tensor(np.array(3.0), requires_grad=True)
        x.zero_grad()
        y = x * x  # dy/dx = 2x through two paths to the same parent
        y.backward()
        assert x.grad == pytest.approx(6.0)


class TestActivations:
    def test_relu_masks_negatives(self):
        out = relu(Tensor([-2.0, 0.0, 3.0]))
        assert np.array_equal(out.data, [0.0, 0.0, 3.0])

    def test_tanh_range(self):
        out = tanh(Tensor(Rng(8).normal(0.0, 5.0, 100)))
        assert np.all(np.abs(out.data) < 1.0)

    def test_gelu_fixed_points(self):
        assert gelu(Tensor(0.0)).item() == 0.0
        # GELU(x) -> x for large x, -> 0 for very negative x
        assert gelu(Tensor(10.0)).item() == pytest.approx(10.0, abs=1e-8)
        assert gelu(Tensor(-10.0)).item() == pytest.approx(0.0, abs=1e-8)

    def test_finite_forward_outputs(self):
        x = Tensor(Rng(9).normal(0.0, 4.0, (6, 6)))
        for fn in (relu, tanh, gelu, sigmoid, softmax_rows):
            assert np.isfinite(fn(x).data).all()


class TestElementwiseShapeRules:
    def test_incompatible_add_raises(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 3))) + Tensor(np.zeros((4, 5)))

    def test_scalar_broadcast_keeps_dtype(self):
        x = Tensor(np.zeros((2, 2), dtype=np.float32))
        out = x + 1.0
        assert out.dtype == np.float32

    def test_bias_broadcast_gradient_reduces(self):
        b = Tensor(np.zeros(3), requires_grad=True)
        b.zero_grad()
        out = Tensor(np.ones((4, 3))) + b
        out.sum().backward()
        assert np.array_equal(b.grad, np.full(3, 4.0))
