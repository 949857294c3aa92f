import numpy as np
import pytest

from acts.network import DenseLayer, Network
from acts.toy import train_and_gate

ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")


def random_net(rng, sizes, activations=None, transform="neg_logit", normalize=True):
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        act = "identity" if activations is None else activations[i]
        layers.append(DenseLayer(rng.normal(size=(n_out, n_in)),
                                 rng.normal(size=n_out), act))
    m = sizes[0]
    if normalize:
        mean, std = rng.uniform(0.2, 0.8, m), rng.uniform(0.2, 1.5, m)
    else:
        mean, std = np.zeros(m), np.ones(m)
    return Network(tuple(layers), mean, std, transform)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def and_gate():
    """(net, test_accuracy, seed) trained once per session."""
    return train_and_gate(0)


# -- acceptance summary ---------------------------------------------------

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
