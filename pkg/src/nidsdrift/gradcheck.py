"""Finite-difference check of the hand-written backward pass."""

from __future__ import annotations

import numpy as np

from . import mlp

FD_STEP = 1e-5
GRADCHECK_TOLERANCE = 1e-4
# below this magnitude relative error is measured against the floor instead
MAGNITUDE_FLOOR = 1e-6
# inputs with a ReLU pre-activation this close to zero are redrawn (kink)
KINK_MARGIN = 1e-3


def _rel_error(analytic, numeric) -> float:
    analytic = np.ravel(analytic)
    numeric = np.ravel(numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), MAGNITUDE_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / scale))


def _loss(model, x, y) -> float:
    p = mlp.forward(model, x)
    return float(mlp.bce(np.array([p]), np.array([float(y)]))[0])


def _random_case(rng):
    k = int(rng.integers(1, 9))
    model = mlp.init_model(k, int(rng.integers(2 ** 31)))
    for b in model.biases:
        b[:] = rng.normal(0.0, 0.3, b.shape)
    while True:
        x = rng.uniform(-1.0, 1.0, k)
        z1 = model.weights[0] @ x + model.biases[0]
        if np.min(np.abs(z1)) > KINK_MARGIN:
            return model, x, float(rng.integers(0, 2))


def check_case(model, x, y, h: float = FD_STEP) -> float:
    """Max relative error over input and parameter gradients for one (net, input, label)."""
    _, gw, gb, dx = mlp.loss_and_gradients(model, x[None, :], [y])
    worst = 0.0

    num_dx = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        num_dx[i] = (_loss(model, x + e, y) - _loss(model, x - e, y)) / (2 * h)
    worst = max(worst, _rel_error(dx[0], num_dx))

    for params, grads in ((model.weights, gw), (model.biases, gb)):
        for p, g in zip(params, grads):
            num = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                orig = p[idx]
                p[idx] = orig + h
                up = _loss(model, x, y)
                p[idx] = orig - h
                down = _loss(model, x, y)
                p[idx] = orig
                num[idx] = (up - down) / (2 * h)
            worst = max(worst, _rel_error(g, num))
    return worst


def max_relative_error(seed: int = 0, trials: int = 100) -> float:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    return max(check_case(*_random_case(rng)) for _ in range(trials))
