import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import check_gradients, max_relative_error, numeric_gradient
from shortsent.errors import (
    ConfigError,
    ContractError,
    DimensionError,
    DomainError,
    InputError,
    StateError,
)
from shortsent.tensor import (
    Tape,
    Tensor,
    add,
    backward,
    concat,
    elementwise_binary,
    elementwise_unary,
    hadamard,
    ln,
    matmul,
    relu,
    reshape,
    row,
    scale,
    sgd_step,
    sigmoid,
    softmax,
    subtract,
    take_rows,
    tanh,
    total,
    zero_grads,
)


class TestMatmul:
    def test_identity(self):
        a = Tensor(np.eye(2))
        b = Tensor([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(a, b).values, b.values)

    def test_projector(self):
        a = Tensor([[1.0, 0.0], [0.0, 0.0]])
        b = Tensor([[5.0], [7.0]])
        np.testing.assert_array_equal(matmul(a, b).values, [[5.0], [0.0]])

    def test_matvec(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        v = Tensor([1.0, 1.0])
        np.testing.assert_array_equal(matmul(a, v).values, [3.0, 7.0])

    def test_shape_mismatch_names_both_shapes(self):
        a = Tensor(np.zeros((2, 3)))
        b = Tensor(np.zeros((2, 3)))
        with pytest.raises(DimensionError, match=r"\(2, 3\)"):
            matmul(a, b)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        a = Tensor(rng.uniform(-2, 2, (3, 4)), requires_grad=True)
        b = Tensor(rng.uniform(-2, 2, (4, 2)), requires_grad=True)
        check_gradients(lambda: total(matmul(a, b)), [a, b], tol=1e-6)


class TestElementwise:
    def test_sigmoid_at_zero(self):
        assert sigmoid(Tensor([0.0])).values[0] == 0.5

    def test_tanh_at_zero(self):
        assert tanh(Tensor([0.0])).values[0] == 0.0

    def test_ln_matches_default_cross_entropy_value(self):
        assert ln(Tensor([0.3])).values[0] == pytest.approx(-1.2040, abs=1e-4)

    def test_ln_rejects_nonpositive_with_index(self):
        with pytest.raises(DomainError, match=r"\(1,\)"):
            ln(Tensor([1.0, -0.5]))

    def test_hadamard_annihilator(self):
        out = hadamard(Tensor([1.0, 2.0, 3.0]), Tensor([0.0, 0.0, 0.0]))
        np.testing.assert_array_equal(out.values, [0.0, 0.0, 0.0])

    def test_add_identity(self):
        x = Tensor([1.5, -2.0])
        np.testing.assert_array_equal(add(x, Tensor([0.0, 0.0])).values, x.values)

    def test_binary_shape_mismatch(self):
        with pytest.raises(DimensionError):
            add(Tensor([1.0]), Tensor([1.0, 2.0]))

    def test_hadamard_gradient_is_other_operand(self):
        rng = np.random.default_rng(1)
        a = Tensor(rng.uniform(-2, 2, 5), requires_grad=True)
        b = Tensor(rng.uniform(-2, 2, 5))
        with Tape():
            backward(total(hadamard(a, b)))
        np.testing.assert_allclose(a.grad, b.values)
        numeric = numeric_gradient(lambda: float(total(hadamard(a, b)).values), a)
        assert max_relative_error(a.grad, numeric) < 1e-6

    def test_dispatchers(self):
        x = Tensor([1.0, 2.0])
        np.testing.assert_array_equal(
            elementwise_binary(x, x, "add").values, add(x, x).values
        )
        np.testing.assert_array_equal(
            elementwise_unary(x, "relu").values, relu(x).values
        )
        with pytest.raises(ConfigError):
            elementwise_unary(x, "softplus")
        with pytest.raises(ConfigError):
            elementwise_binary(x, x, "divide")

    @pytest.mark.parametrize("kind", ["sigmoid", "tanh", "relu", "ln"])
    def test_unary_gradients(self, kind):
        rng = np.random.default_rng(2)
        vals = rng.uniform(0.1, 2.0, 6) if kind == "ln" else rng.uniform(-2, 2, 6)
        x = Tensor(vals, requires_grad=True)
        check_gradients(lambda: total(elementwise_unary(x, kind)), [x])


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(Tensor([0.0, 0.0, 0.0])).values, 1.0 / 3)

    def test_large_inputs_do_not_overflow(self):
        out = softmax(Tensor([1000.0, 0.0, 0.0])).values
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [1.0, 0.0, 0.0], atol=1e-12)

    def test_sums_to_one_and_preserves_argmax(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            x = rng.uniform(-50, 50, rng.integers(1, 8))
            y = softmax(Tensor(x)).values
            assert abs(y.sum() - 1.0) < 1e-12
            assert np.all(y > 0)
            assert int(np.argmax(y)) == int(np.argmax(x))

    @given(st.lists(st.floats(-30, 30), min_size=1, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_probability_simplex_property(self, vals):
        y = softmax(Tensor(vals)).values
        assert abs(y.sum() - 1.0) < 1e-12
        assert np.all(y > 0)

    def test_gradient(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.uniform(-2, 2, 5), requires_grad=True)
        w = Tensor(rng.uniform(-1, 1, 5))
        check_gradients(lambda: total(hadamard(softmax(x), w)), [x])


class TestConcat:
    def test_vector_lengths_add(self):
        a = Tensor(np.zeros(320))
        b = Tensor(np.zeros(100))
        assert concat([a, b]).shape == (420,)

    def test_single_part(self):
        x = Tensor([1.0, 2.0])
        np.testing.assert_array_equal(concat([x]).values, x.values)

    def test_mismatch_names_part_index(self):
        a = Tensor(np.zeros((2, 3)))
        b = Tensor(np.zeros((2, 4)))
        with pytest.raises(DimensionError, match="part 1"):
            concat([a, b], axis=0)

    def test_round_trip_slicing_recovers_parts(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            axis = int(rng.integers(0, 2))
            shared = int(rng.integers(1, 5))
            parts = []
            for _ in range(int(rng.integers(1, 4))):
                n = int(rng.integers(1, 5))
                shape = (n, shared) if axis == 0 else (shared, n)
                parts.append(Tensor(rng.normal(size=shape)))
            out = concat(parts, axis=axis).values
            offset = 0
            for p in parts:
                width = p.shape[axis]
                sl = (
                    out[offset : offset + width]
                    if axis == 0
                    else out[:, offset : offset + width]
                )
                np.testing.assert_array_equal(sl, p.values)
                offset += width

    def test_gradient_splits_back(self):
        rng = np.random.default_rng(6)
        a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
        check_gradients(lambda: total(tanh(concat([a, b], axis=1))), [a, b])


class TestGatherReshape:
    def test_take_rows_and_row(self):
        m = Tensor(np.arange(12.0).reshape(4, 3))
        np.testing.assert_array_equal(take_rows(m, [3, 0]).values, [[9, 10, 11], [0, 1, 2]])
        np.testing.assert_array_equal(row(m, 1).values, [3, 4, 5])

    def test_take_rows_out_of_range(self):
        m = Tensor(np.zeros((2, 2)))
        with pytest.raises(InputError):
            take_rows(m, [0, 2])

    def test_take_rows_gradient_scatter_adds(self):
        m = Tensor(np.ones((3, 2)), requires_grad=True)
        with Tape():
            backward(total(take_rows(m, [0, 0, 2])))
        np.testing.assert_array_equal(m.grad, [[2, 2], [0, 0], [1, 1]])

    def test_reshape_gradient(self):
        x = Tensor(np.random.default_rng(7).normal(size=(2, 3)), requires_grad=True)
        check_gradients(lambda: total(sigmoid(reshape(x, (6,)))), [x])

    def test_reshape_size_mismatch(self):
        with pytest.raises(DimensionError):
            reshape(Tensor(np.zeros(4)), (3,))


class TestBackward:
    def test_sum_gives_ones(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        with Tape():
            backward(total(x))
        np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])

    def test_sigmoid_at_zero_gives_quarter(self):
        x = Tensor(np.zeros(4), requires_grad=True)
        with Tape():
            backward(total(sigmoid(x)))
        np.testing.assert_allclose(x.grad, 0.25)

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape():
            y = sigmoid(x)
            with pytest.raises(ContractError):
                backward(y)

    def test_loss_off_tape_rejected(self):
        x = Tensor([1.0], requires_grad=True)
        loss = total(x)  # no active tape
        with pytest.raises(StateError):
            backward(loss)

    def test_fanout_sums_both_paths(self):
        # x feeds two consumers; total gradient is the sum of both paths
        x = Tensor([0.7, -0.3], requires_grad=True)
        with Tape():
            y = add(total(sigmoid(x)), total(hadamard(x, x)))
            backward(y)
        s = 1.0 / (1.0 + np.exp(-x.values))
        np.testing.assert_allclose(x.grad, s * (1 - s) + 2 * x.values)

    def test_grads_accumulate_until_zero_grad(self):
        x = Tensor([2.0], requires_grad=True)
        for expected in (1.0, 2.0):
            with Tape():
                backward(total(x))
            np.testing.assert_allclose(x.grad, expected)
        x.zero_grad()
        np.testing.assert_array_equal(x.grad, 0.0)
        with Tape():
            backward(total(x))
        np.testing.assert_allclose(x.grad, 1.0)

    def test_zero_grad_then_backward_idempotent_in_outcome(self):
        x = Tensor([0.5, 1.5], requires_grad=True)

        def run():
            x.zero_grad()
            with Tape():
                backward(total(tanh(x)))
            return x.grad.copy()

        np.testing.assert_array_equal(run(), run())


class TestSgd:
    def test_single_arithmetic_step(self):
        p = Tensor([1.0], requires_grad=True)
        p.grad[:] = 2.0
        sgd_step([p], 0.1)
        np.testing.assert_allclose(p.values, [0.8])

    def test_rejects_non_positive_learning_rate(self):
        p = Tensor([1.0], requires_grad=True)
        with pytest.raises(ConfigError):
            sgd_step([p], 0.0)
        with pytest.raises(ConfigError):
            sgd_step([p], -0.1)

    def test_tiny_learning_rate_barely_moves(self):
        p = Tensor([1.0], requires_grad=True)
        p.grad[:] = 2.0
        sgd_step([p], 1e-300)
        np.testing.assert_allclose(p.values, [1.0])

    def test_quadratic_converges_at_closed_form_rate(self):
        # f(p) = p^2, so the iterates are p_k = (1 - 2 lr)^k
        p = Tensor([1.0], requires_grad=True)
        lr = 0.1
        for _ in range(100):
            p.zero_grad()
            with Tape():
                backward(total(hadamard(p, p)))
            sgd_step([p], lr)
        closed_form = (1 - 2 * lr) ** 100
        np.testing.assert_allclose(p.values[0], closed_form, rtol=1e-12)
        assert abs(p.values[0]) < 1e-9

    def test_zero_grads_helper(self):
        ps = [Tensor([1.0], requires_grad=True) for _ in range(3)]
        for p in ps:
            p.grad[:] = 5.0
        zero_grads(ps)
        assert all(p.grad[0] == 0.0 for p in ps)


class TestScale:
    def test_values_and_gradient(self):
        x = Tensor([1.0, -2.0], requires_grad=True)
        with Tape():
            backward(total(scale(x, 2.5)))
        np.testing.assert_allclose(x.grad, 2.5)
