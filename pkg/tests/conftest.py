import numpy as np
import pytest
from hypothesis import settings

from nidsdrift.mlp import MlpModel

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_ACCEPTANCE_LINES = []


def logistic_net(w, b=0.0, c=1e-6) -> MlpModel:
    """A k -> 25 -> 10 -> 1 net that computes sigmoid(w . x + b) up to O(c^2).

    Each input passes through a +x / -x ReLU pair (exactly linear), the tanh
    layer sees c * (w . x) where tanh is linear to ~1e-13, and the output
    layer undoes the 1/c scaling.
    """
    w = np.atleast_1d(np.asarray(w, dtype=np.float64))
    k = w.size
    if 2 * k > 25:
        raise ValueError("too many inputs for the +/- ReLU encoding")
    W1 = np.zeros((25, k))
    W2 = np.zeros((10, 25))
    for i in range(k):
        W1[2 * i, i] = 1.0
        W1[2 * i + 1, i] = -1.0
        W2[0, 2 * i] = c * w[i]
        W2[0, 2 * i + 1] = -c * w[i]
    W3 = np.zeros((1, 10))
    W3[0, 0] = 1.0 / c
    return MlpModel([k, 25, 10, 1], [W1, W2, W3],
                    [np.zeros(25), np.zeros(10), np.array([float(b)])])


@pytest.fixture
def acceptance_log():
    def record(criterion: str, passed: bool, detail: str):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
