import math

import numpy as np
import pytest

from conftest import logistic_net
from nidsdrift import mlp
from nidsdrift.mlp import MlpModel, TrainConfig, TrainingDivergence, forward, init_model, input_gradient, predict_batch, train

SIGMOID_1 = 1.0 / (1.0 + math.exp(-1.0))


def reference_loss(weights, biases, x, y):
    """Straight-line forward pass + BCE, written independently of the package."""
    h1 = np.maximum(weights[0] @ x + biases[0], 0)
    h2 = np.tanh(weights[1] @ h1 + biases[1])
    z = (weights[2] @ h2 + biases[2])[0]
    p = 1.0 / (1.0 + math.exp(-z))
    return -(y * math.log(p) + (1 - y) * math.log(1 - p))


def fd_gradients(model, x, y, h=1e-5):
    ws = [w.copy() for w in model.weights]
    bs = [b.copy() for b in model.biases]
    f = lambda: reference_loss(ws, bs, xx, y)  # noqa: E731
    xx = x.copy()
    gx = np.zeros_like(x)
    for i in range(x.size):
        xx[i] += h
        up = f()
        xx[i] -= 2 * h
        down = f()
        xx[i] += h
        gx[i] = (up - down) / (2 * h)
    gparams = []
    for arr in ws + bs:
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            arr[idx] += h
            up = f()
            arr[idx] -= 2 * h
            down = f()
            arr[idx] += h
            g[idx] = (up - down) / (2 * h)
        gparams.append(g)
    return gx, gparams


def rel_err(a, b, floor=1e-6):
    a, b = np.ravel(a), np.ravel(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def test_init_shapes_k32():
    m = init_model(32, seed=0)
    assert [w.shape for w in m.weights] == [(25, 32), (10, 25), (1, 10)]
    assert m.layer_sizes == [32, 25, 10, 1]


def test_init_deterministic_zero_bias_and_glorot_range():
    a, b = init_model(7, 3), init_model(7, 3)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)
    for bias in a.biases:
        assert not bias.any()
    for w in a.weights:
        fan_out, fan_in = w.shape
        assert np.abs(w).max() <= math.sqrt(6 / (fan_in + fan_out))
    assert not np.array_equal(a.weights[0], init_model(7, 4).weights[0])


def test_init_rejects_k0():
    with pytest.raises(ValueError):
        init_model(0, 0)


def zero_net(k=4):
    m = init_model(k, 0)
    for arr in m.weights + m.biases:
        arr[...] = 0.0
    return m


def test_forward_zero_net_is_half():
    assert forward(zero_net(), np.ones(4)) == 0.5


def test_forward_range_and_no_dropout_at_inference():
    m = init_model(5, 1)
    X = np.random.default_rng(0).normal(size=(50, 5)) * 3
    p1, p2 = forward(m, X), forward(m, X)
    np.testing.assert_array_equal(p1, p2)
    assert ((p1 > 0) & (p1 < 1)).all()


def test_forward_degenerate_logistic():
    assert forward(logistic_net(2.0), np.array([0.5])) == pytest.approx(SIGMOID_1, abs=1e-9)
    assert forward(logistic_net(2.0), np.array([0.5])) == pytest.approx(0.73106, abs=5e-6)


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError):
        forward(init_model(3, 0), np.ones(4))


def test_input_gradient_degenerate_logistic():
    g = input_gradient(logistic_net(2.0), np.array([0.5]), 1)
    assert g[0] == pytest.approx((SIGMOID_1 - 1) * 2, abs=1e-9)
    assert g[0] == pytest.approx(-0.53788, abs=5e-6)


def test_input_gradient_zero_net():
    assert not input_gradient(zero_net(), np.ones(4), 1).any()


def test_input_gradient_batch_matches_rows():
    m = init_model(6, 2)
    X = np.random.default_rng(1).uniform(size=(5, 6))
    y = np.array([0, 1, 1, 0, 1])
    batch = input_gradient(m, X, y)
    for i in range(5):
        np.testing.assert_allclose(batch[i], input_gradient(m, X[i], y[i]), rtol=0, atol=1e-15)


def test_gradients_match_finite_differences_100_pairs():
    rng = np.random.default_rng(2024)
    worst = 0.0
    checked = 0
    while checked < 100:
        k = int(rng.integers(1, 7))
        m = init_model(k, int(rng.integers(1 << 30)))
        for b in m.biases:
            b[:] = rng.normal(0, 0.3, b.shape)
        x = rng.uniform(-1, 1, k)
        if np.min(np.abs(m.weights[0] @ x + m.biases[0])) < 1e-3:
            continue  # too close to a ReLU kink for central differences
        y = int(rng.integers(0, 2))
        _, gw, gb, dx = mlp.loss_and_gradients(m, x[None], [y])
        gx, gparams = fd_gradients(m, x, y)
        worst = max(worst, rel_err(dx[0], gx), *(rel_err(a, b) for a, b in zip(gw + gb, gparams)))
        checked += 1
    assert worst <= 1e-4


def test_predict_tie_and_threshold():
    assert predict_batch(zero_net(), np.zeros((3, 4))).tolist() == [1, 1, 1]
    net = logistic_net(1.0)
    logit = lambda p: math.log(p / (1 - p))  # noqa: E731
    X = np.array([[logit(0.49)], [logit(0.51)]])
    assert predict_batch(net, X).tolist() == [0, 1]


def separable_blobs(n=400, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = np.where(y[:, None] == 1, [0.75, 0.7], [0.25, 0.3]) + rng.normal(0, 0.05, (n, 2))
    return np.clip(X, 0, 1), y


def test_train_separable_blobs():
    X, y = separable_blobs()
    m, log = train(init_model(2, 0), X, y, TrainConfig(seed=0, batch_size=32))
    assert (predict_batch(m, X) == y).mean() >= 0.95
    assert len(log.mean_loss) == 20 and all(map(math.isfinite, log.mean_loss))


@pytest.mark.parametrize("optimizer", ["adam", "sgd"])
def test_loss_non_increasing_first_epochs_without_dropout(optimizer):
    X, y = separable_blobs()
    lr = 0.001 if optimizer == "adam" else 0.05
    _, log = train(init_model(2, 1), X, y,
                   TrainConfig(learning_rate=lr, dropout=0.0, epochs=5, batch_size=32,
                               optimizer=optimizer, seed=1))
    assert all(b <= a + 1e-9 for a, b in zip(log.mean_loss, log.mean_loss[1:]))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(dropout=1.0)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="rmsprop")


def test_train_warm_start_and_input_untouched():
    X, y = separable_blobs()
    m0 = init_model(2, 0)
    before = m0.to_json()
    m1, _ = train(m0, X, y, TrainConfig(epochs=2, batch_size=100))
    m2, _ = train(m1, X, y, TrainConfig(epochs=1, batch_size=100))
    assert m0.to_json() == before
    assert 0 < m1.train_step_count < m2.train_step_count
    assert m2.train_step_count == m1.train_step_count + 4


def test_train_is_bit_deterministic():
    X, y = separable_blobs()
    cfg = TrainConfig(epochs=3, seed=5, batch_size=64)
    a, _ = train(init_model(2, 0), X, y, cfg)
    b, _ = train(init_model(2, 0), X, y, cfg)
    assert a.to_json() == b.to_json()


def test_train_divergence_reports_epoch():
    X, y = separable_blobs(50)
    m = init_model(2, 0)
    m.weights[2][0, 0] = np.nan
    with pytest.raises(TrainingDivergence) as info:
        train(m, X, y, TrainConfig())
    assert info.value.epoch == 0


def test_train_empty_input():
    with pytest.raises(ValueError):
        train(init_model(2, 0), np.zeros((0, 2)), np.zeros(0), TrainConfig())


def test_model_json_round_trip_and_fingerprint():
    m = init_model(4, 9)
    again = MlpModel.from_dict(m.to_dict())
    assert again.to_json() == m.to_json()
    assert again.fingerprint() == m.fingerprint()
    assert init_model(4, 10).fingerprint() != m.fingerprint()
    with pytest.raises(ValueError):
        MlpModel.from_dict({**m.to_dict(), "format_version": 99})
