import numpy as np
import pytest

from wattsplit.errors import TrainingError
from wattsplit.nn import (
    LSTM,
    Adam,
    Conv1D,
    Dense,
    Flatten,
    MaxPool1D,
    Network,
    ReLU,
    ShapeError,
    Softmax,
    cross_entropy,
    gradient_check,
    mse,
    softmax,
)
from wattsplit.nn.losses import one_hot


def jitter_biases(net, rng, lim=0.25):
    """Wake silent units so finite differences see healthy gradients."""
    for name, p in net.parameters():
        if name.endswith(".b"):
            p += rng.uniform(-lim, lim, p.shape).astype(p.dtype)


class TestForwardSemantics:
    def test_conv_identity_kernel(self):
        conv = Conv1D(1, 1, 1)
        conv.params["W"][0, 0, 0] = 1.0
        x = np.arange(6, dtype=np.float32).reshape(1, 6, 1)
        assert np.array_equal(conv.forward(x), x)

    def test_conv_difference_kernel(self):
        conv = Conv1D(1, 1, 3)
        conv.params["W"][:, 0, 0] = [1.0, 0.0, -1.0]
        x = np.array([1.0, 2.0, 3.0, 4.0], dtype=np.float32).reshape(1, 4, 1)
        assert conv.forward(x).ravel().tolist() == [-2.0, -2.0]

    def test_conv_output_length(self):
        conv = Conv1D(1, 4, 5)
        assert conv.forward(np.zeros((2, 20, 1), np.float32)).shape == (2, 16, 4)

    def test_conv_linearity_without_bias(self, rng):
        conv = Conv1D(2, 3, 3, rng=rng)
        x = rng.uniform(-1, 1, (4, 10, 2)).astype(np.float32)
        y = rng.uniform(-1, 1, (4, 10, 2)).astype(np.float32)
        lhs = conv.forward(2.0 * x + 3.0 * y)
        rhs = 2.0 * conv.forward(x) + 3.0 * conv.forward(y)
        assert np.allclose(lhs, rhs, atol=1e-5)

    def test_maxpool_matches_naive_max(self, rng):
        pool = MaxPool1D(2)
        x = rng.uniform(-1, 1, (3, 11, 4)).astype(np.float32)
        out = pool.forward(x)
        assert out.shape == (3, 5, 4)
        for b in range(3):
            for i in range(5):
                for c in range(4):
                    assert out[b, i, c] == max(x[b, 2 * i, c], x[b, 2 * i + 1, c])

    def test_zero_lstm_emits_zero(self, rng):
        lstm = LSTM(1, 8)  # zero weights
        lstm.params["b"][:] = 0.0  # clear the forget bias too
        x = rng.uniform(-5, 5, (4, 6, 1)).astype(np.float32)
        assert np.array_equal(lstm.forward(x), np.zeros((4, 8), np.float32))

    def test_lstm_return_sequences_shape(self, rng):
        lstm = LSTM(3, 8, return_sequences=True, rng=rng)
        assert lstm.forward(np.zeros((2, 5, 3), np.float32)).shape == (2, 5, 8)

    def test_softmax_rows_sum_to_one(self, rng):
        p = Softmax().forward(rng.normal(0, 5, (50, 2)).astype(np.float32))
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-6)
        assert (p >= 0).all()

    def test_forward_is_deterministic(self, rng):
        net = Network([Dense(4, 3, rng=np.random.default_rng(0)), ReLU()])
        x = rng.uniform(-1, 1, (5, 4)).astype(np.float32)
        assert np.array_equal(net.forward(x), net.forward(x))

    def test_shape_error_names_layer(self):
        net = Network([Flatten(), Dense(4, 2)])
        with pytest.raises(ShapeError, match="layer 1 .Dense."):
            net.forward(np.zeros((2, 5, 1), np.float32))


class TestLosses:
    def test_mse_perfect_fit(self):
        loss, grad = mse(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        assert loss == 0.0
        assert np.array_equal(grad, np.zeros(2))

    def test_cross_entropy_uniform_is_ln2(self):
        probs = softmax(np.array([[0.0, 0.0]]))
        loss, _ = cross_entropy(probs, one_hot([0]))
        assert loss == pytest.approx(np.log(2.0), abs=1e-7)

    def test_cross_entropy_decreases_with_confidence(self):
        target = one_hot([0])
        losses = [cross_entropy(np.array([[p, 1 - p]], np.float32), target)[0]
                  for p in (0.4, 0.6, 0.9)]
        assert losses[0] > losses[1] > losses[2]

    def test_losses_match_direct_formulas(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 50))
            pred = rng.uniform(-10, 10, n)
            truth = rng.uniform(-10, 10, n)
            loss, _ = mse(pred, truth)
            direct = sum((float(p) - float(t)) ** 2 for p, t in zip(pred, truth)) / n
            assert loss == pytest.approx(direct, rel=1e-9)

            probs = softmax(rng.normal(0, 2, (n, 2)))
            labels = rng.integers(0, 2, n)
            ce, _ = cross_entropy(probs, one_hot(labels))
            direct = -sum(np.log(probs[i, labels[i]]) for i in range(n)) / n
            assert ce == pytest.approx(direct, rel=1e-9)

    def test_dense_mse_closed_form_gradient(self, rng):
        net = Network([Dense(4, 2, rng=rng)])
        x = rng.uniform(-1, 1, (8, 4)).astype(np.float32)
        y = rng.uniform(-1, 1, (8, 2)).astype(np.float32)
        pred = net.forward(x)
        _, dy = mse(pred, y)
        net.backward(dy)
        expected = 2.0 / pred.size * x.T @ (pred - y)
        assert np.allclose(dict(net.gradients())["0.W"], expected, atol=1e-6)

    def test_perfect_fit_has_zero_gradients(self, rng):
        net = Network([Dense(3, 2, rng=rng)])
        x = rng.uniform(-1, 1, (4, 3)).astype(np.float32)
        y = net.forward(x).copy()
        _, dy = mse(net.forward(x), y)
        net.backward(dy)
        for _, g in net.gradients():
            assert np.allclose(g, 0.0)


class TestAdam:
    def test_zero_gradient_keeps_parameters(self):
        p = np.array([1.0, 2.0], dtype=np.float32)
        opt = Adam()
        opt.step([("p", p)], [("p", np.zeros(2, np.float32))])
        assert p.tolist() == [1.0, 2.0]
        assert opt.t == 1

    def test_constant_gradient_update_approaches_step_size(self):
        p = np.zeros(1, dtype=np.float64)
        opt = Adam(step_size=1e-3)
        g = np.full(1, 0.37)
        for _ in range(500):
            prev = p.copy()
            opt.step([("p", p)], [("p", g)])
        assert abs(prev - p)[0] == pytest.approx(1e-3, rel=0.01)

    def test_non_finite_gradient_rejected(self):
        p = np.zeros(2, dtype=np.float32)
        with pytest.raises(TrainingError, match="non-finite"):
            Adam().step([("p", p)], [("p", np.array([np.nan, 1.0], np.float32))])

    def test_quadratic_convergence_matches_scalar_reference(self):
        # independent scalar reference of the same update rule
        theta_ref, m, v, t = 0.0, 0.0, 0.0, 0
        lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
        p = np.zeros(1, dtype=np.float64)
        opt = Adam(step_size=lr)
        for _ in range(500):
            g = 2.0 * (theta_ref - 3.0)
            t += 1
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            theta_ref -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
            opt.step([("p", p)], [("p", 2.0 * (p - 3.0))])
            assert p[0] == pytest.approx(theta_ref, abs=1e-12)
        assert abs(p[0] - 3.0) < 1e-3


class TestGradientChecks:
    def test_linear_network_mse_is_exact(self, rng):
        net = Network([Dense(6, 3, rng=rng)])
        x = rng.uniform(-1, 1, (4, 6)).astype(np.float32)
        y = rng.uniform(-1, 1, (4, 3)).astype(np.float32)
        assert gradient_check(net, x, y, "mse", n_coords=10_000) < 1e-9

    @pytest.mark.parametrize("layers,shape,loss", [
        ([Conv1D(2, 3, 3), Flatten()], (4, 8, 2), "mse"),
        ([Conv1D(1, 4, 3), ReLU(), MaxPool1D(2), Flatten()], (4, 9, 1), "mse"),
        ([LSTM(2, 6, activation="tanh"), Dense(6, 2)], (6, 5, 2), "mse"),
        ([LSTM(2, 6, activation="relu"), Dense(6, 2)], (6, 5, 2), "mse"),
        ([LSTM(1, 5, activation="relu", return_sequences=True),
          LSTM(5, 5, activation="relu"), Dense(5, 1)], (6, 5, 1), "mse"),
        ([Dense(6, 4), ReLU(), Dense(4, 2), Softmax()], (6, 6), "cross_entropy"),
    ])
    def test_every_layer_kind_against_finite_differences(self, layers, shape, loss):
        rng = np.random.default_rng(7)
        for layer in layers:
            for name in layer.params:
                limit = 1.0 / np.sqrt(layer.params[name].shape[0])
                layer.params[name] = rng.uniform(-limit, limit,
                                                 layer.params[name].shape)
        net = Network(layers)
        jitter_biases(net, rng)
        x = rng.uniform(-1, 1, shape).astype(np.float32)
        if loss == "cross_entropy":
            target = one_hot(rng.integers(0, 2, shape[0]))
        else:
            out_shape = net.forward(x.astype(np.float64)).shape
            target = rng.uniform(-1, 1, out_shape).astype(np.float32)
        assert gradient_check(net, x, target, loss, n_coords=400, seed=3) < 1e-6
