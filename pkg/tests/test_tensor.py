import numpy as np
import pytest

from sslab import tensor as T


def tape_param(data, name="p"):
    tape = T.Tape()
    return tape, tape.parameter(name, data)


class TestForwardOps:
    def test_relu_definition(self):
        out = T.relu(np.array([-1.0, 0.0, 2.0]))
        assert np.array_equal(out.data, [0.0, 0.0, 2.0])

    def test_sigmoid_at_zero(self):
        assert T.sigmoid(np.array([0.0])).data[0] == 0.5

    def test_conv2d_sliding_window_oracle(self):
        # 4x4 ones against a 3x3 ones kernel, stride 1, pad 1: interior
        # pixels see the full window (9), corners only a 2x2 patch (4)
        out = T.conv2d(np.ones((1, 1, 4, 4)), np.ones((1, 1, 3, 3)), stride=1, padding=1).data[0, 0]
        assert out[1, 1] == out[1, 2] == out[2, 1] == out[2, 2] == 9.0
        assert out[0, 0] == out[0, 3] == out[3, 0] == out[3, 3] == 4.0
        assert out[0, 1] == 6.0

    def test_conv2d_matches_brute_force(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 3, 6, 5))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        got = T.conv2d(x, w, b, stride=2, padding=1).data
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        expected = np.zeros_like(got)
        for n in range(2):
            for o in range(4):
                for y in range(got.shape[2]):
                    for xx in range(got.shape[3]):
                        patch = xp[n, :, 2 * y : 2 * y + 3, 2 * xx : 2 * xx + 3]
                        expected[n, o, y, xx] = np.sum(patch * w[o]) + b[o]
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_shape_mismatch_names_op_and_extents(self):
        with pytest.raises(T.ShapeMismatchError, match="conv2d.*channels"):
            T.conv2d(np.ones((1, 2, 4, 4)), np.ones((1, 3, 3, 3)))
        with pytest.raises(T.ShapeMismatchError, match=r"add.*\(2,\).*\(3,\)"):
            T.add(np.ones(2), np.ones(3))

    def test_dropout_eval_is_identity(self):
        x = T.Tensor(np.array([1.0, 2.0]))
        assert T.dropout(x, 0.5, mode="eval") is x

    def test_dropout_train_inverted_scaling(self):
        rng = np.random.default_rng(3)
        x = np.ones((1000,))
        out = T.dropout(T.Tensor(x), 0.25, mode="train", rng=rng).data
        kept = out[out > 0]
        assert np.allclose(kept, 1.0 / 0.75)
        assert abs((out > 0).mean() - 0.75) < 0.05

    def test_dropout_probability_validated(self):
        with pytest.raises(T.ContractError):
            T.dropout(np.ones(3), 1.0, mode="train", rng=np.random.default_rng(0))

    def test_forward_op_dispatch(self):
        out = T.forward_op("relu", [np.array([-2.0, 5.0])])
        assert np.array_equal(out.data, [0.0, 5.0])
        with pytest.raises(T.ContractError, match="unknown op"):
            T.forward_op("softmax", [np.ones(2)])

    def test_forward_determinism_bit_identical(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(2, 3, 8, 8))
        w = rng.normal(size=(4, 3, 3, 3))
        a = T.conv2d(x, w, stride=1, padding=1).data
        b = T.conv2d(x, w, stride=1, padding=1).data
        assert a.tobytes() == b.tobytes()
        d1 = T.dropout(T.Tensor(x), 0.3, "train", np.random.default_rng(9)).data
        d2 = T.dropout(T.Tensor(x), 0.3, "train", np.random.default_rng(9)).data
        assert d1.tobytes() == d2.tobytes()


class TestBackprop:
    def test_grad_of_squared_norm(self):
        tape, w = tape_param(np.array([1.0, 2.0]), "w")
        grads = T.backpropagate(tape, T.tensor_sum(T.mul(w, w)))
        assert np.array_equal(grads["w"].data, [2.0, 4.0])

    def test_eval_dropout_grad_equals_no_dropout(self):
        x = np.array([[0.5, -1.0, 2.0]])
        w = np.random.default_rng(0).normal(size=(1, 3))

        def loss_with(dropout_mode):
            tape = T.Tape()
            wp = tape.parameter("w", w)
            h = T.linear(T.Tensor(x), wp)
            if dropout_mode is not None:
                h = T.dropout(h, 0.5, mode=dropout_mode)
            return T.backpropagate(tape, T.tensor_sum(h))["w"].data

        assert np.array_equal(loss_with("eval"), loss_with(None))

    def test_non_scalar_loss_rejected(self):
        tape, w = tape_param(np.array([1.0, 2.0]), "w")
        with pytest.raises(T.ContractError, match="scalar"):
            T.backpropagate(tape, T.mul(w, w))

    def test_unreachable_parameter_gets_zeros(self):
        tape = T.Tape()
        a = tape.parameter("a", np.array([1.0, 2.0]))
        tape.parameter("unused", np.ones((2, 2)))
        grads = T.backpropagate(tape, T.tensor_sum(a))
        assert np.array_equal(grads["unused"].data, np.zeros((2, 2)))
        assert np.array_equal(grads["a"].data, [1.0, 1.0])

    def test_add_backward_distributes_upstream_unchanged(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 4))
        tape = T.Tape()
        a = tape.parameter("a", x)
        b = tape.parameter("b", -x)
        weights = rng.normal(size=(3, 4))
        loss = T.tensor_sum(T.mul(T.add(a, b), T.Tensor(weights)))
        grads = T.backpropagate(tape, loss)
        assert grads["a"].data.tobytes() == weights.tobytes()
        assert grads["b"].data.tobytes() == weights.tobytes()

    def test_random_model_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(3, 2, 5, 5))
        theta = rng.normal(size=(2, 2, 3, 3)) * 0.5

        def f(w):
            h = T.relu(T.conv2d(T.Tensor(x), w, stride=1, padding=1))
            return T.tensor_mean(T.sigmoid(T.global_avg_pool(h)))

        assert T.finite_difference_check(f, theta, 1e-6) < 1e-5


class TestFiniteDifferenceCheck:
    def test_quadratic_is_near_exact(self):
        err = T.finite_difference_check(lambda t: T.mul(t, t), np.array(3.0), 1e-6)
        assert err < 1e-8

    def test_sigmoid_linear_two_steps_agree(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(4, 3))

        def f(w):
            return T.tensor_mean(T.sigmoid(T.linear(T.Tensor(x), w)))

        theta = rng.normal(size=(1, 3))
        e1 = T.finite_difference_check(f, theta, 1e-6)
        e2 = T.finite_difference_check(f, theta, 1e-5)
        assert e1 < 1e-5 and e2 < 1e-5

    def test_constant_function_zero_error(self):
        err = T.finite_difference_check(lambda t: T.scale(T.tensor_sum(t), 0.0), np.ones(4), 1e-6)
        assert err == 0.0

    def test_step_must_be_positive(self):
        with pytest.raises(T.ContractError):
            T.finite_difference_check(lambda t: T.tensor_sum(t), np.ones(2), 0.0)


def _random_op_case(rng):
    """One random (f, theta) pair exercising a randomly chosen op."""
    kind = rng.choice(["conv2d", "linear", "relu", "sigmoid", "global_avg_pool", "add", "mul", "scale", "mean"])
    if kind == "conv2d":
        n, c, o = (int(rng.integers(1, 3)) for _ in range(3))
        h, w = (int(rng.integers(3, 8)) for _ in range(2))
        stride = int(rng.integers(1, 3))
        x = rng.normal(size=(n, c, h, w))
        theta = rng.normal(size=(o, c, 3, 3))
        return lambda t: T.tensor_mean(T.conv2d(T.Tensor(x), t, None, stride, 1)), theta
    if kind == "linear":
        n, d, o = (int(rng.integers(1, 8)) for _ in range(3))
        x = rng.normal(size=(n, d))
        b = rng.normal(size=o)
        theta = rng.normal(size=(o, d))
        return lambda t: T.tensor_mean(T.linear(T.Tensor(x), t, T.Tensor(b))), theta
    if kind == "global_avg_pool":
        shape = tuple(int(rng.integers(1, 8)) for _ in range(4))
        return lambda t: T.tensor_sum(T.global_avg_pool(t)), rng.normal(size=shape)
    shape = tuple(int(rng.integers(1, 8)) for _ in range(int(rng.integers(1, 4))))
    other = rng.normal(size=shape)
    fns = {
        "relu": lambda t: T.tensor_sum(T.relu(t)),
        "sigmoid": lambda t: T.tensor_sum(T.sigmoid(t)),
        "add": lambda t: T.tensor_sum(T.add(t, T.Tensor(other))),
        "mul": lambda t: T.tensor_sum(T.mul(t, T.Tensor(other))),
        "scale": lambda t: T.tensor_sum(T.scale(t, 1.7)),
        "mean": lambda t: T.tensor_mean(t),
    }
    theta = rng.normal(size=shape)
    if kind == "relu":
        theta = theta + np.sign(theta) * 0.05  # keep away from the kink
    return fns[kind], theta


def test_property_every_op_matches_finite_differences():
    rng = np.random.default_rng(12345)
    for _ in range(40):
        f, theta = _random_op_case(rng)
        assert T.finite_difference_check(f, theta, 1e-6) < 1e-5
