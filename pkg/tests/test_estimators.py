import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.utils.estimator_checks import parametrize_with_checks

from conftest import random_net
from acts.attacks import make_config, run_attack
from acts.estimators import ACTSScorer, AdversarialAttack, DenseNetClassifier
from acts.exceptions import ConfigError, DimensionMismatchError
from acts.metric import acts_from_deltas
from acts.network import classify


@parametrize_with_checks([DenseNetClassifier(epochs=20)])
def test_sklearn_compatible(estimator, check):
    check(estimator)


def test_classifier_learns_and_gate():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(2000, 2))
    y = np.where((X[:, 0] >= 0.5) & (X[:, 1] >= 0.5), "on", "off")
    clf = DenseNetClassifier(epochs=40, learning_rate=0.05).fit(X, y)
    assert clf.score(X, y) > 0.97
    assert set(clf.predict(X[:10])) <= {"on", "off"}
    np.testing.assert_allclose(clf.predict_proba(X[:5]).sum(axis=1), 1.0)
    assert np.array_equal(np.argmin(clf.loss_scores(X[:5]), axis=1),
                          np.argmax(clf.predict_proba(X[:5]), axis=1))


def test_params_roundtrip(rng):
    net = random_net(rng, [3, 4, 3], ["relu", "identity"])
    scorer = ACTSScorer(net, method="bim", epsilon=0.01, k=2, norm="linf")
    params = scorer.get_params()
    assert params["method"] == "bim" and params["k"] == 2
    twin = clone(scorer).set_params(k=1)
    assert twin.k == 1
    x = np.full(3, 0.5)
    assert classify(twin.network, x) == classify(net, x)


def test_scorer_matches_library_calls(rng):
    net = random_net(rng, [3, 6, 4], ["tanh", "identity"])
    X = rng.uniform(size=(12, 3))
    scorer = ACTSScorer(net, method="pgd", epsilon=0.02, k=2, random_state=5).fit(X)
    got = scorer.transform(X)
    assert got.shape == (12, 1)
    for i, x in enumerate(X):
        t = classify(net, x)
        tr = run_attack(net, x, t, make_config("pgd", 0.02, seed=5 + i))
        assert got[i, 0] == acts_from_deltas(net, x, tr.deltas, 2).score


def test_attack_transformer(rng):
    net = random_net(rng, [3, 5, 2], ["relu", "identity"])
    X = rng.uniform(size=(8, 3))
    atk = AdversarialAttack(net, method="bim", epsilon=0.05).fit(X)
    X_adv = atk.transform(X)
    assert X_adv.shape == X.shape
    assert np.max(np.abs(X_adv - X)) <= 0.05 + 1e-12
    labels = np.array([classify(net, x) for x in X])
    traces = atk.attack(X, labels)
    np.testing.assert_array_equal(np.array([t.x_adv for t in traces]), X_adv)


def test_accepts_fitted_classifier_in_pipeline():
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(300, 2))
    y = (X[:, 0] > X[:, 1]).astype(int)
    clf = DenseNetClassifier(epochs=10).fit(X, y)
    pipe = make_pipeline(ACTSScorer(clf, epsilon=0.01, k=1))
    scores = pipe.fit_transform(X)
    assert scores.shape == (300, 1) and np.all(scores >= 0)
    # points far from the diagonal are harder to flip than points near it
    d = np.abs(X[:, 0] - X[:, 1])
    assert np.median(scores[d > 0.3]) > np.median(scores[d < 0.05])


def test_wrapper_validation(rng):
    net = random_net(rng, [3, 2])
    with pytest.raises(ConfigError):
        ACTSScorer(network="nope").fit(np.zeros((2, 3)))
    with pytest.raises(DimensionMismatchError):
        ACTSScorer(net).fit(np.zeros((2, 4)))
    with pytest.raises(ConfigError):
        ACTSScorer(net, k=0).fit(np.zeros((2, 3)))
    wrapped = DenseNetClassifier.from_network(net)
    assert wrapped.predict(np.full((1, 3), 0.5)).shape == (1,)
