"""Two-input AND-gate toy problem.

A point ``(x1, x2)`` in the unit square is labelled 1 iff both coordinates
are at least 0.5. A small ReLU network is trained on it and every grid
point is scored under a one-step FGSM direction, which makes the
relationship between the score and the distance to the decision boundary
easy to inspect.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attacks import fgsm, make_config
from .dataio import Dataset
from .exceptions import ComputationError, ConfigError, DegenerateDatasetError
from .metric import acts_from_deltas
from .network import Network, accuracy, classify, init_network, train_sgd

logger = logging.getLogger(__name__)

GRID = "grid"
UNIFORM = "uniform"

# (epochs, learning rate) phases
_SCHEDULE = ((40, 0.05), (30, 0.01), (20, 0.002))
_MAX_ATTEMPTS = 5
_MIN_ACCURACY = 0.99


def and_label(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return ((X[..., 0] >= 0.5) & (X[..., 1] >= 0.5)).astype(np.int64)


def generate_and_dataset(n: int, sampling: str = UNIFORM, seed: int = 0) -> Dataset:
    """``n`` labelled points; ``grid`` lays out a ceil(sqrt(n))^2 lattice
    over the square (corners included), ``uniform`` draws i.i.d. points."""
    if n < 4:
        raise DegenerateDatasetError("need at least 4 samples")
    if sampling == GRID:
        side = int(np.ceil(np.sqrt(n)))
        g = np.linspace(0.0, 1.0, side)
        x1, x2 = np.meshgrid(g, g, indexing="ij")
        X = np.column_stack([x1.ravel(), x2.ravel()])
    elif sampling == UNIFORM:
        X = np.random.default_rng(seed).uniform(0.0, 1.0, size=(n, 2))
    else:
        raise ConfigError(f"unknown sampling scheme {sampling!r}")
    y = and_label(X)
    if y.min() == y.max():
        raise DegenerateDatasetError("sample contains only one class")
    return Dataset(X, y, tuple(str(i) for i in range(len(y))))


def train_and_gate(seed: int = 0, n_train: int = 10_000, n_test: int = 2_000,
                   hidden: int = 8):
    """Train a 2-hidden-2 ReLU net; returns ``(net, test_accuracy, seed_used)``.

    Retries with the next seed when test accuracy stays below 0.99.
    """
    for attempt in range(_MAX_ATTEMPTS):
        s = seed + attempt
        train = generate_and_dataset(n_train, UNIFORM, seed=2 * s + 1)
        test = generate_and_dataset(n_test, UNIFORM, seed=2 * s + 2)
        net = init_network([2, hidden, 2], "relu", seed=s,
                           mean=[0.5, 0.5], std=[np.sqrt(1 / 12)] * 2)
        for epochs, lr in _SCHEDULE:
            net = train_sgd(net, train.features, train.labels, epochs, lr, seed=s)
        acc = accuracy(net, test.features, test.labels)
        logger.info("attempt %d (seed %d): test accuracy %.4f", attempt + 1, s, acc)
        if acc >= _MIN_ACCURACY:
            return net, acc, s
    raise ComputationError(
        f"test accuracy stayed below {_MIN_ACCURACY} after {_MAX_ATTEMPTS} attempts"
    )


@dataclass
class ToyResult:
    network: Network
    accuracy: float
    seed: int
    x1: np.ndarray
    x2: np.ndarray
    labels: np.ndarray
    scores: np.ndarray
    resolution: int


def score_grid(net: Network, resolution: int, fgsm_epsilon: float = 0.1):
    g = np.linspace(0.0, 1.0, resolution)
    x1, x2 = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    labels = and_label(np.column_stack([x1, x2]))
    cfg = make_config("fgsm", fgsm_epsilon)
    scores = np.zeros(x1.size)
    for i in np.flatnonzero(labels == 1):
        x = np.array([x1[i], x2[i]])
        # a label-1 point the net already gets wrong needs no perturbation
        if classify(net, x) != 1:
            continue
        trace = fgsm(net, x, 1, cfg)
        scores[i] = acts_from_deltas(net, x, trace.deltas, k=1).score
    return x1, x2, labels, scores


def run_toy_experiment(grid_resolution: int = 101, fgsm_epsilon: float = 0.1,
                       seed: int = 0) -> ToyResult:
    if grid_resolution < 10:
        raise ConfigError("grid_resolution must be at least 10")
    net, acc, used = train_and_gate(seed)
    x1, x2, labels, scores = score_grid(net, grid_resolution, fgsm_epsilon)
    return ToyResult(net, acc, used, x1, x2, labels, scores, grid_resolution)


def write_grid_csv(result: ToyResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "label", "acts_score"])
        for a, b, lab, s in zip(result.x1, result.x2, result.labels, result.scores):
            w.writerow([repr(float(a)), repr(float(b)), int(lab),
                        "inf" if np.isinf(s) else repr(float(s))])


def boundary_distance(x1, x2) -> np.ndarray:
    """L-infinity distance from each point to the AND-gate decision boundary."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    inside = (x1 >= 0.5) & (x2 >= 0.5)
    d_in = np.minimum(x1 - 0.5, x2 - 0.5)
    # outside: distance to the quadrant [0.5, 1]^2
    d_out = np.maximum(np.maximum(0.5 - x1, 0.0), np.maximum(0.5 - x2, 0.0))
    return np.where(inside, d_in, d_out)
