"""Dense feed-forward network engine.

Everything here works in float64. Inputs are raw feature vectors in the
``[0, 1]`` box; the network normalizes them internally, so every gradient
returned by this module is taken with respect to the *raw* input.

Class scores live in the "loss domain": lower is better and the predicted
class is the argmin of the score vector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    InvalidLabelError,
    NonFiniteValueError,
    SchemaError,
    TrainingDivergedError,
    ValidationError,
)

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")
NEG_LOGIT = "neg_logit"
NEG_LOG_SOFTMAX = "neg_log_softmax"
SCORE_TRANSFORMS = (NEG_LOGIT, NEG_LOG_SOFTMAX)


def _frozen(a, name: str, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionMismatchError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DenseLayer:
    """``activation(weights @ a + bias)`` with weights of shape (out, in)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        w = _frozen(self.weights, "weights", 2)
        b = _frozen(self.bias, "bias", 1)
        if b.shape[0] != w.shape[0]:
            raise DimensionMismatchError(
                f"bias length {b.shape[0]} does not match weight rows {w.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise SchemaError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Network:
    layers: tuple
    mean: np.ndarray
    std: np.ndarray
    score_transform: str = NEG_LOGIT
    num_inputs: int = field(init=False)
    num_classes: int = field(init=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ConfigError("network needs at least one layer")
        for i, layer in enumerate(layers):
            if not isinstance(layer, DenseLayer):
                raise ConfigError(f"layer {i} is not a DenseLayer")
            if i and layer.n_in != layers[i - 1].n_out:
                raise DimensionMismatchError(
                    f"layer {i} expects {layer.n_in} inputs but layer {i - 1} "
                    f"produces {layers[i - 1].n_out}"
                )
        mean = _frozen(self.mean, "normalization mean", 1)
        std = _frozen(self.std, "normalization std", 1)
        m = layers[0].n_in
        if mean.shape != (m,) or std.shape != (m,):
            raise DimensionMismatchError(
                f"normalization vectors must have length {m}"
            )
        if np.any(std <= 0):
            raise ConfigError("normalization std must be strictly positive")
        k = layers[-1].n_out
        if k < 2:
            raise ConfigError("network must output at least 2 classes")
        if self.score_transform not in SCORE_TRANSFORMS:
            raise SchemaError(f"unknown score transform {self.score_transform!r}")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "num_inputs", m)
        object.__setattr__(self, "num_classes", k)


def init_network(
    sizes,
    activation: str = "relu",
    seed: int = 0,
    mean=None,
    std=None,
    score_transform: str = NEG_LOGIT,
) -> Network:
    """He-initialized network with layer widths ``sizes`` (input first).

    Hidden layers use ``activation``; the output layer is always identity.
    """
    sizes = list(sizes)
    if len(sizes) < 2:
        raise ConfigError("sizes must list at least input and output widths")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in))
        act = "identity" if i == len(sizes) - 2 else activation
        layers.append(DenseLayer(w, np.zeros(n_out), act))
    m = sizes[0]
    mean = np.zeros(m) if mean is None else mean
    std = np.ones(m) if std is None else std
    return Network(tuple(layers), mean, std, score_transform)


# -- activations -----------------------------------------------------------

def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return _sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(name, z, a):
    # relu'(0) is taken to be 0
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


# -- forward ---------------------------------------------------------------

def _as_input(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.num_inputs:
        raise DimensionMismatchError(
            f"expected input of length {net.num_inputs}, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteValueError("input contains non-finite entries")
    return x


def _as_batch(net: Network, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.num_inputs:
        raise DimensionMismatchError(
            f"expected inputs of shape (n, {net.num_inputs}), got {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise NonFiniteValueError("inputs contain non-finite entries")
    return X


def _run(net: Network, X: np.ndarray):
    """Forward pass over rows of X, keeping (pre, post) activations."""
    a = (X - net.mean) / net.std
    cache = []
    for layer in net.layers:
        z = a @ layer.weights.T + layer.bias
        a = _activate(layer.activation, z)
        cache.append((z, a))
    return a, cache


def _log_softmax(z):
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _scores_from_logits(net: Network, z):
    if net.score_transform == NEG_LOGIT:
        return -z
    return -_log_softmax(z)


def logits(net: Network, x) -> np.ndarray:
    x = _as_input(net, x)
    return _run(net, x[None, :])[0][0]


def forward(net: Network, x) -> np.ndarray:
    """Loss-domain score vector for one input (lower = more likely)."""
    return _scores_from_logits(net, logits(net, x))


def forward_batch(net: Network, X) -> np.ndarray:
    X = _as_batch(net, X)
    return _scores_from_logits(net, _run(net, X)[0])


def classify_scores(y) -> int:
    """argmin of a score vector; ties go to the lowest class index."""
    return int(np.argmin(np.asarray(y)))


def classify(net: Network, x) -> int:
    return classify_scores(forward(net, x))


def predict_batch(net: Network, X) -> np.ndarray:
    return np.argmin(forward_batch(net, X), axis=1)


def softmax_batch(net: Network, X) -> np.ndarray:
    X = _as_batch(net, X)
    return np.exp(_log_softmax(_run(net, X)[0]))


# -- gradients -------------------------------------------------------------

def _backprop(net: Network, cache, upstream: np.ndarray) -> np.ndarray:
    """Pull row-gradients w.r.t. the final layer output back to the raw input.

    ``upstream`` has shape (r, K) for a single input; the result is (r, M).
    """
    g = upstream
    for layer, (z, a) in zip(reversed(net.layers), reversed(cache)):
        g = g * _activation_grad(layer.activation, z[0], a[0])
        g = g @ layer.weights
    return g / net.std


def input_jacobian(net: Network, x) -> np.ndarray:
    """K x M matrix of d(score_j)/d(x_i) at the raw input ``x``."""
    x = _as_input(net, x)
    out, cache = _run(net, x[None, :])
    k = net.num_classes
    if net.score_transform == NEG_LOGIT:
        upstream = -np.eye(k)
    else:
        p = np.exp(_log_softmax(out[0]))
        upstream = -np.eye(k) + p[None, :]
    return _backprop(net, cache, upstream)


def _check_label(net: Network, label) -> int:
    if isinstance(label, (bool, np.bool_)) or int(label) != label:
        raise InvalidLabelError(f"label must be an integer, got {label!r}")
    label = int(label)
    if not 0 <= label < net.num_classes:
        raise InvalidLabelError(
            f"label {label} outside [0, {net.num_classes})"
        )
    return label


def _ce_logit_grad(z: np.ndarray, label: int) -> np.ndarray:
    # softmax - onehot, with the true-class entry computed as -(sum of the
    # others) so it does not cancel to exactly zero for confident inputs
    p = np.exp(_log_softmax(z))
    g = p.copy()
    g[label] = -(p.sum() - p[label])
    return g


def cross_entropy(net: Network, x, label) -> float:
    label = _check_label(net, label)
    z = logits(net, x)
    return float(-_log_softmax(z)[label])


def loss_gradient(net: Network, x, label) -> np.ndarray:
    """Gradient of softmax cross-entropy w.r.t. the raw input."""
    label = _check_label(net, label)
    x = _as_input(net, x)
    out, cache = _run(net, x[None, :])
    g = _ce_logit_grad(out[0], label)
    return _backprop(net, cache, g[None, :])[0]


# -- training --------------------------------------------------------------

def accuracy(net: Network, X, y) -> float:
    y = np.asarray(y)
    return float(np.mean(predict_batch(net, X) == y))


def train_sgd(
    net: Network,
    X,
    y,
    epochs: int,
    lr: float,
    seed: int = 0,
    batch_size: int = 32,
    momentum: float = 0.9,
) -> Network:
    """Minibatch SGD (with momentum) on softmax cross-entropy.

    Returns a new network; ``net`` is left untouched. Shuffling is driven by
    ``seed`` only, so the result is reproducible.
    """
    X = _as_batch(net, X)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValidationError("training set is empty")
    if y.shape != (X.shape[0],):
        raise DimensionMismatchError("labels must be a vector matching the rows of X")
    if np.any(y < 0) or np.any(y >= net.num_classes):
        raise InvalidLabelError(f"labels must lie in [0, {net.num_classes})")
    if epochs < 0 or not (0 < lr < np.inf) or batch_size < 1:
        raise ConfigError("epochs must be >= 0, lr finite and > 0, batch_size >= 1")
    y = y.astype(np.int64)

    weights = [layer.weights.copy() for layer in net.layers]
    biases = [layer.bias.copy() for layer in net.layers]
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]
    acts = [layer.activation for layer in net.layers]
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    Xn = (X - net.mean) / net.std

    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            a = Xn[idx]
            cache = [(None, a)]
            for w, b, act in zip(weights, biases, acts):
                z = a @ w.T + b
                a = _activate(act, z)
                cache.append((z, a))
            logp = _log_softmax(a)
            rows = np.arange(len(idx))
            total += -logp[rows, y[idx]].sum()
            g = np.exp(logp)
            g[rows, y[idx]] -= 1.0
            g /= len(idx)
            for i in reversed(range(len(weights))):
                z, a_out = cache[i + 1]
                a_in = cache[i][1]
                g = g * _activation_grad(acts[i], z, a_out)
                grad_w = g.T @ a_in
                grad_b = g.sum(axis=0)
                g = g @ weights[i]
                vel_w[i] = momentum * vel_w[i] - lr * grad_w
                vel_b[i] = momentum * vel_b[i] - lr * grad_b
                weights[i] += vel_w[i]
                biases[i] += vel_b[i]
        if not np.isfinite(total) or not all(np.all(np.isfinite(w)) for w in weights):
            raise TrainingDivergedError(f"training diverged in epoch {epoch}")

    trained = replace(
        net,
        layers=tuple(
            DenseLayer(w, b, act) for w, b, act in zip(weights, biases, acts)
        ),
    )
    if epochs:
        logger.info(
            "trained %d epochs, final train accuracy %.4f",
            epochs, accuracy(trained, X, y),
        )
    return trained
