import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import ce_oracle, fd_jacobian, logits_oracle, relu_pattern, scores_oracle
from conftest import ACTIVATIONS, random_net
from acts.exceptions import (
    ConfigError,
    DimensionMismatchError,
    InvalidLabelError,
    NonFiniteValueError,
    TrainingDivergedError,
)
from acts.network import (
    DenseLayer,
    Network,
    accuracy,
    classify,
    classify_scores,
    cross_entropy,
    forward,
    init_network,
    input_jacobian,
    logits,
    loss_gradient,
    train_sgd,
)


def identity_net(m):
    return Network((DenseLayer(np.eye(m), np.zeros(m), "identity"),), np.zeros(m), np.ones(m))


def test_identity_network_negates():
    net = identity_net(3)
    x = np.array([0.1, 0.7, 0.3])
    np.testing.assert_array_equal(forward(net, x), -x)


def test_forward_is_deterministic(rng):
    net = random_net(rng, [4, 6, 3], ["tanh", "identity"])
    x = rng.uniform(size=4)
    a, b = forward(net, x), forward(net, x)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("transform", ["neg_logit", "neg_log_softmax"])
def test_forward_matches_loop_oracle(rng, transform):
    for _ in range(20):
        net = random_net(rng, [2, 8, 3], ["relu", "identity"], transform)
        x = rng.uniform(size=2)
        np.testing.assert_allclose(forward(net, x), scores_oracle(net, x), rtol=1e-12, atol=1e-14)


def test_forward_rejects_bad_input(rng):
    net = random_net(rng, [3, 2])
    with pytest.raises(DimensionMismatchError):
        forward(net, np.zeros(4))
    with pytest.raises(NonFiniteValueError):
        forward(net, np.array([0.0, np.nan, 0.0]))


def test_classify_argmin_and_tiebreak():
    assert classify_scores([0.2, 0.9]) == 0
    assert classify_scores([0.5, 0.5]) == 0
    assert classify_scores([0.9, 0.1, 0.1]) == 1


def test_classify_matches_oracle(rng):
    for _ in range(30):
        net = random_net(rng, [3, 5, 4], ["sigmoid", "identity"])
        x = rng.uniform(size=3)
        y = scores_oracle(net, x)
        assert classify(net, x) == min(range(4), key=lambda j: (y[j], j))


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=8),
       st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
def test_classify_invariant_to_shift_and_scale(y, shift, scale):
    y = np.array(y)
    assert classify_scores(y * scale + shift) == classify_scores(y) or np.isclose(
        np.sort(y)[0], np.sort(y)[1]
    )


def test_network_is_immutable(rng):
    net = random_net(rng, [2, 3])
    with pytest.raises(ValueError):
        net.layers[0].weights[0, 0] = 1.0
    with pytest.raises(AttributeError):
        net.score_transform = "neg_log_softmax"


def test_network_validation():
    layer = DenseLayer(np.ones((2, 3)), np.zeros(2))
    with pytest.raises(ConfigError):
        Network((layer,), np.zeros(3), np.array([1.0, 0.0, 1.0]))
    with pytest.raises(DimensionMismatchError):
        Network((layer, DenseLayer(np.ones((2, 3)), np.zeros(2))), np.zeros(3), np.ones(3))
    with pytest.raises(ConfigError):
        Network((DenseLayer(np.ones((1, 3)), np.zeros(1)),), np.zeros(3), np.ones(3))
    with pytest.raises(NonFiniteValueError):
        DenseLayer(np.array([[np.inf]]), np.zeros(1))


# -- Jacobian ---------------------------------------------------------------

def test_affine_jacobian_is_weight_product(rng):
    net = random_net(rng, [3, 4, 2], ["identity", "identity"])
    expected = -(net.layers[1].weights @ net.layers[0].weights) / net.std
    for _ in range(3):
        np.testing.assert_allclose(input_jacobian(net, rng.uniform(size=3)), expected,
                                   rtol=1e-13, atol=1e-13)


def test_dead_relu_unit_contributes_nothing():
    w1 = np.array([[1.0, 1.0], [-1.0, -1.0]])
    net = Network(
        (DenseLayer(w1, np.zeros(2), "relu"),
         DenseLayer(np.array([[1.0, 5.0], [2.0, 7.0]]), np.zeros(2))),
        np.zeros(2), np.ones(2),
    )
    # second hidden unit is inactive for positive inputs
    djm = input_jacobian(net, np.array([0.3, 0.4]))
    np.testing.assert_allclose(djm, -np.outer([1.0, 2.0], [1.0, 1.0]))


def _interior_point(rng, net, m, h=1e-4):
    """A point whose ReLU pattern is constant over the finite-difference stencil."""
    while True:
        x = rng.uniform(0.05, 0.95, m)
        pat = relu_pattern(net, x)
        if all(
            relu_pattern(net, x + s * h * e) == pat
            for e in np.eye(m) for s in (-1, 1)
        ):
            return x


@pytest.mark.parametrize("transform", ["neg_logit", "neg_log_softmax"])
def test_jacobian_matches_finite_differences(rng, transform):
    for _ in range(20):
        net = random_net(rng, [2, 8, 3], ["relu", "identity"], transform)
        x = _interior_point(rng, net, 2)
        fd = np.array(fd_jacobian(lambda v: scores_oracle(net, v), x))
        an = input_jacobian(net, x)
        assert an.shape == (3, 2)
        np.testing.assert_allclose(an, fd, rtol=1e-5, atol=1e-8)


def test_affine_first_order_is_exact(rng):
    net = random_net(rng, [4, 3, 3], ["identity", "identity"])
    x = rng.uniform(size=4)
    dx = rng.normal(size=4) * 0.1
    lhs = forward(net, x + dx) - forward(net, x)
    np.testing.assert_allclose(lhs, input_jacobian(net, x) @ dx, rtol=1e-10, atol=1e-12)


def test_jacobian_pure(rng):
    net = random_net(rng, [3, 4, 2], ["tanh", "identity"])
    x = rng.uniform(size=3)
    before = x.copy()
    a = input_jacobian(net, x)
    assert input_jacobian(net, x).tobytes() == a.tobytes()
    np.testing.assert_array_equal(x, before)


# -- loss gradient ----------------------------------------------------------

def test_uniform_logits_gradient(rng):
    # zero output weights give uniform softmax regardless of input
    hidden = DenseLayer(rng.normal(size=(4, 3)), rng.normal(size=4), "tanh")
    out = DenseLayer(np.zeros((3, 4)), np.zeros(3))
    net = Network((hidden, out), np.zeros(3), np.ones(3))
    x = rng.uniform(size=3)
    for t in range(3):
        g = loss_gradient(net, x, t)
        jac_logits = -input_jacobian(net, x)
        expected = (np.full(3, 1 / 3) - np.eye(3)[t]) @ jac_logits
        np.testing.assert_allclose(g, expected, atol=1e-15)


def test_affine_1d_gradient_closed_form():
    # logits z0 = 2x + 0.5, z1 = -x; normalization (x - 0.25) / 0.5
    net = Network((DenseLayer(np.array([[2.0], [-1.0]]), np.array([0.5, 0.0])),),
                  np.array([0.25]), np.array([0.5]))
    x = 0.4
    u = (x - 0.25) / 0.5
    z0, z1 = 2 * u + 0.5, -u
    p1 = math.exp(z1) / (math.exp(z0) + math.exp(z1))
    # dCE/du for label 0 is p1 * (dz1/du - dz0/du) = p1 * (-3); du/dx = 2
    expected = p1 * -3.0 * 2.0
    np.testing.assert_allclose(loss_gradient(net, np.array([x]), 0), [expected], rtol=1e-14)


def test_loss_gradient_matches_finite_differences(rng):
    for _ in range(20):
        acts = [rng.choice(["sigmoid", "tanh"]), "identity"]
        net = random_net(rng, [3, 6, 4], acts)
        x = rng.uniform(size=3)
        t = int(rng.integers(4))
        fd = np.array(fd_jacobian(lambda v: [ce_oracle(net, v, t)], x))[0]
        np.testing.assert_allclose(loss_gradient(net, x, t), fd, rtol=1e-5, atol=1e-9)
        assert math.isclose(cross_entropy(net, x, t), ce_oracle(net, x, t), rel_tol=1e-12)


def test_loss_gradient_rejects_bad_label(rng):
    net = random_net(rng, [2, 3])
    for bad in (-1, 3, 1.5):
        with pytest.raises(InvalidLabelError):
            loss_gradient(net, np.zeros(2), bad)


def test_confident_gradient_is_not_zero():
    net = Network((DenseLayer(np.array([[30.0], [-30.0]]), np.zeros(2)),),
                  np.zeros(1), np.ones(1))
    g = loss_gradient(net, np.array([1.0]), 0)
    assert g[0] != 0.0 and np.sign(g[0]) == -1


# -- training ---------------------------------------------------------------

def test_zero_epochs_is_noop(rng):
    net = random_net(rng, [2, 4, 2], ["relu", "identity"])
    X = rng.uniform(size=(10, 2))
    y = rng.integers(0, 2, 10)
    out = train_sgd(net, X, y, epochs=0, lr=0.1)
    for a, b in zip(net.layers, out.layers):
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.bias, b.bias)


def test_two_point_dataset_is_learned():
    # perceptron-style sanity: two points on either side of x = 0.5
    X = np.array([[0.1], [0.9]])
    y = np.array([0, 1])
    net = init_network([1, 2], seed=3)
    net = train_sgd(net, X, y, epochs=200, lr=0.5, batch_size=2)
    assert accuracy(net, X, y) == 1.0


def test_training_is_seeded(rng):
    net = init_network([2, 4, 2], seed=0)
    X = rng.uniform(size=(64, 2))
    y = (X[:, 0] > X[:, 1]).astype(int)
    a = train_sgd(net, X, y, 3, 0.1, seed=7)
    b = train_sgd(net, X, y, 3, 0.1, seed=7)
    assert all(la.weights.tobytes() == lb.weights.tobytes() for la, lb in zip(a.layers, b.layers))


def test_training_divergence_detected():
    net = init_network([1, 4, 2], activation="identity", seed=0)
    # overlapping classes keep the gradient nonzero forever
    X = np.array([[0.2], [0.2], [0.8], [0.8]])
    y = np.array([0, 1, 0, 1])
    with np.errstate(all="ignore"):
        with pytest.raises(TrainingDivergedError):
            train_sgd(net, X, y, epochs=50, lr=1e300, batch_size=1)


def test_and_gate_accuracy(and_gate):
    _, acc, _ = and_gate
    assert acc >= 0.99


def test_logits_and_activations_cover_all_kinds(rng):
    for act in ACTIVATIONS:
        net = random_net(rng, [3, 4, 2], [act, "identity"])
        x = rng.uniform(size=3)
        np.testing.assert_allclose(logits(net, x), logits_oracle(net, x), rtol=1e-12)
