"""scikit-learn compatible wrappers.

``DenseNetClassifier`` trains the numpy network; ``AdversarialAttack`` and
``ACTSScorer`` are transformers that take a trained network as a
constructor parameter, so they clone, pipeline and grid-search like any
other estimator.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

from .attacks import make_config, run_attack
from .exceptions import ConfigError, DimensionMismatchError
from .metric import acts_from_deltas
from .network import (
    Network,
    forward_batch,
    init_network,
    predict_batch,
    softmax_batch,
    train_sgd,
)


def _resolve_network(network) -> Network:
    if isinstance(network, Network):
        return network
    if isinstance(network, DenseNetClassifier):
        check_is_fitted(network, "network_")
        return network.network_
    raise ConfigError("network must be a Network or a fitted DenseNetClassifier")


def _check_inputs(X, net: Network) -> np.ndarray:
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != net.num_inputs:
        raise DimensionMismatchError(
            f"X has {X.shape[1]} features, network expects {net.num_inputs}"
        )
    return X


class DenseNetClassifier(ClassifierMixin, BaseEstimator):
    """Fully connected classifier trained with minibatch SGD.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Widths of the hidden layers.
    activation : {"relu", "sigmoid", "tanh", "identity"}
    score_transform : {"neg_logit", "neg_log_softmax"}
        Map from logits to loss-domain scores.
    epochs, learning_rate, batch_size, momentum
        SGD settings.
    normalize : bool
        Store the training mean/std inside the network.
    random_state : int
    """

    def __init__(self, hidden_layer_sizes=(8,), activation="relu",
                 score_transform="neg_logit", epochs=50, learning_rate=0.05,
                 batch_size=32, momentum=0.9, normalize=True, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.score_transform = score_transform
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.momentum = momentum
        self.normalize = normalize
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("need at least two classes; got one class")
        if self.normalize:
            mean = X.mean(axis=0)
            std = X.std(axis=0)
            std[std == 0] = 1.0
        else:
            mean = std = None
        sizes = [X.shape[1], *self.hidden_layer_sizes, self.classes_.size]
        net = init_network(sizes, self.activation, self.random_state, mean, std,
                           self.score_transform)
        self.network_ = train_sgd(net, X, encoded, self.epochs, self.learning_rate,
                                  seed=self.random_state, batch_size=self.batch_size,
                                  momentum=self.momentum)
        return self

    @classmethod
    def from_network(cls, net: Network) -> "DenseNetClassifier":
        """Wrap an already trained network (classes are 0..K-1)."""
        clf = cls(score_transform=net.score_transform)
        clf.network_ = net
        clf.classes_ = np.arange(net.num_classes)
        clf.n_features_in_ = net.num_inputs
        return clf

    def _validated(self, X):
        check_is_fitted(self, "network_")
        return validate_data(self, X, dtype=np.float64, reset=False)

    def loss_scores(self, X):
        """Loss-domain class scores; the predicted class is the argmin."""
        X = self._validated(X)
        return forward_batch(self.network_, X)

    def predict_proba(self, X):
        X = self._validated(X)
        return softmax_batch(self.network_, X)

    def predict(self, X):
        X = self._validated(X)
        return self.classes_[predict_batch(self.network_, X)]


class AdversarialAttack(TransformerMixin, BaseEstimator):
    """Untargeted FGSM / BIM / PGD as a transformer.

    ``transform`` returns adversarial inputs. Without labels each row is
    attacked away from the network's own prediction. PGD row ``i`` is seeded
    with ``random_state + i``.
    """

    def __init__(self, network=None, method="fgsm", epsilon=0.00039, steps=None,
                 step_size=None, random_state=0):
        self.network = network
        self.method = method
        self.epsilon = epsilon
        self.steps = steps
        self.step_size = step_size
        self.random_state = random_state

    def fit(self, X, y=None):
        self.network_ = _resolve_network(self.network)
        X = _check_inputs(X, self.network_)
        self.config_ = make_config(self.method, self.epsilon, self.steps,
                                   self.step_size, self.random_state)
        self.n_features_in_ = X.shape[1]
        return self

    def attack(self, X, y=None) -> list:
        """Full traces, one per row."""
        check_is_fitted(self, "config_")
        X = _check_inputs(X, self.network_)
        labels = predict_batch(self.network_, X) if y is None else np.asarray(y)
        if labels.shape != (X.shape[0],):
            raise DimensionMismatchError("y must have one label per row")
        cfg = self.config_
        return [
            run_attack(self.network_, x, int(t),
                       make_config(cfg.method, cfg.epsilon, cfg.steps, cfg.step_size,
                                   cfg.seed + i))
            for i, (x, t) in enumerate(zip(X, labels))
        ]

    def transform(self, X, y=None):
        return np.array([tr.x_adv for tr in self.attack(X, y)])


class ACTSScorer(TransformerMixin, BaseEstimator):
    """Per-sample converging-time robustness score.

    Each row is attacked away from its predicted class; the attack steps
    give the directions along which the class scores' speeds are measured.
    ``transform`` returns an ``(n, 1)`` column of scores, ``inf`` where no
    candidate class closes in.
    """

    def __init__(self, network=None, method="fgsm", epsilon=0.00039, steps=None,
                 step_size=None, k=10, norm="l2", cap=math.inf, random_state=0):
        self.network = network
        self.method = method
        self.epsilon = epsilon
        self.steps = steps
        self.step_size = step_size
        self.k = k
        self.norm = norm
        self.cap = cap
        self.random_state = random_state

    def fit(self, X, y=None):
        self.attack_ = AdversarialAttack(self.network, self.method, self.epsilon,
                                         self.steps, self.step_size,
                                         self.random_state).fit(X)
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        self.n_features_in_ = self.attack_.n_features_in_
        return self

    def explain(self, X) -> list:
        """:class:`~acts.metric.ActsResult` for every row."""
        check_is_fitted(self, "attack_")
        X = _check_inputs(X, self.attack_.network_)
        traces = self.attack_.attack(X)
        net = self.attack_.network_
        return [
            acts_from_deltas(net, x, tr.deltas, self.k, self.norm, self.cap)
            for x, tr in zip(X, traces)
        ]

    def score_samples(self, X):
        return np.array([r.score for r in self.explain(X)])

    def transform(self, X):
        return self.score_samples(X)[:, None]
