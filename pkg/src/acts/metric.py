"""Moving speeds in the loss domain and the converging-time score.

The score of an input answers: moving along the attack direction, how much
perturbation does it take (to first order) for some other class score to
catch up with the predicted class score? Speeds come from the input
Jacobian at the clean point; the attack only supplies directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigError,
    DegeneratePerturbationError,
    DimensionMismatchError,
    InconsistentInputError,
)
from .network import Network, classify_scores, forward, input_jacobian

NORMS = ("l2", "linf")


def _norm(v: np.ndarray, kind: str) -> float:
    if kind == "l2":
        return float(np.linalg.norm(v))
    if kind == "linf":
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise ConfigError(f"unknown norm {kind!r}; expected one of {NORMS}")


@dataclass(frozen=True)
class SpeedVector:
    s: np.ndarray
    norm_kind: str = "l2"


def one_step_speeds(djm, delta_x, norm_kind: str = "l2") -> SpeedVector:
    """Rate of change of every class score per unit length of ``delta_x``."""
    djm = np.asarray(djm, dtype=np.float64)
    delta_x = np.asarray(delta_x, dtype=np.float64)
    if djm.ndim != 2 or delta_x.shape != (djm.shape[1],):
        raise DimensionMismatchError(
            f"Jacobian {djm.shape} and perturbation {delta_x.shape} do not line up"
        )
    length = _norm(delta_x, norm_kind)
    if length == 0.0:
        raise DegeneratePerturbationError("perturbation has zero norm")
    return SpeedVector(djm @ delta_x / length, norm_kind)


def multi_step_speeds(djm, deltas, norm_kind: str = "l2") -> SpeedVector:
    """Unweighted mean of one-step speeds over the nonzero steps."""
    djm = np.asarray(djm, dtype=np.float64)
    per_step = []
    for d in deltas:
        d = np.asarray(d, dtype=np.float64)
        if d.shape != (djm.shape[1],):
            raise DimensionMismatchError(
                f"step of shape {d.shape} does not match Jacobian {djm.shape}"
            )
        if _norm(d, norm_kind) > 0.0:
            per_step.append(one_step_speeds(djm, d, norm_kind).s)
    if not per_step:
        raise DegeneratePerturbationError("every perturbation step has zero norm")
    return SpeedVector(np.mean(per_step, axis=0), norm_kind)


@dataclass(frozen=True)
class ActsResult:
    times: dict
    winner: int
    score: float
    capped: bool
    t: int
    candidates: tuple
    k: int
    norm_kind: str = "l2"

    def to_dict(self) -> dict:
        return {
            "times": {str(j): _fmt(v) for j, v in self.times.items()},
            "winner": self.winner,
            "score": _fmt(self.score),
            "capped": self.capped,
            "t": self.t,
            "candidates": list(self.candidates),
            "k": self.k,
            "norm_kind": self.norm_kind,
        }


def _fmt(v: float):
    return "inf" if math.isinf(v) else float(v)


def top_candidates(y, t: int, k: int) -> tuple:
    """The ``k`` classes other than ``t`` with the smallest scores."""
    y = np.asarray(y)
    order = [int(j) for j in np.argsort(y, kind="stable") if j != t]
    return tuple(order[:k])


def acts_score(y, t: int, speeds: SpeedVector, k: int = 10, cap: float = math.inf) -> ActsResult:
    """Converging time of the fastest-closing candidate class.

    ``k`` larger than ``K - 1`` is clipped. Candidates whose score is not
    approaching the predicted class (closing speed <= 0) get ``cap``; if all
    of them do, the result is flagged as capped.
    """
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(speeds.s, dtype=np.float64)
    if y.ndim != 1 or s.shape != y.shape:
        raise DimensionMismatchError("scores and speeds must be vectors of equal length")
    if k < 1:
        raise ConfigError("k must be at least 1")
    if not cap > 0:
        raise ConfigError("cap must be positive")
    t = int(t)
    if not 0 <= t < y.size or classify_scores(y) != t:
        raise InconsistentInputError(f"class {t} is not the argmin of the scores")
    cands = top_candidates(y, t, min(k, y.size - 1))

    times = {}
    for j in cands:
        gap = y[j] - y[t]
        closing = s[t] - s[j]
        if closing <= 0:
            times[j] = cap
        elif gap == 0:
            times[j] = 0.0
        else:
            times[j] = min(gap / closing, cap)
    score = min(times.values())
    winner = min(j for j, v in times.items() if v == score)
    capped = all(s[t] - s[j] <= 0 for j in cands)
    return ActsResult(times, winner, float(score), capped, t, cands, len(cands),
                      speeds.norm_kind)


def acts_from_deltas(net: Network, x, deltas, k: int = 10, norm_kind: str = "l2",
                     cap: float = math.inf) -> ActsResult:
    """Score ``x`` from a list of attack steps.

    A single step gives the one-step speed; several steps are averaged.
    If every step is zero the input has no attack direction and the result
    is capped.
    """
    y = forward(net, x)
    t = classify_scores(y)
    djm = input_jacobian(net, x)
    try:
        speeds = multi_step_speeds(djm, deltas, norm_kind)
    except DegeneratePerturbationError:
        speeds = SpeedVector(np.zeros_like(y), norm_kind)
    return acts_score(y, t, speeds, k, cap)


def time_to_epsilon(time: float, direction, norm_kind: str = "l2") -> float:
    """Convert a converging time into the L-infinity budget of a step
    along ``direction``.

    A time is a length measured in ``norm_kind``; a sign-style step of
    budget eps along ``direction`` has that length times
    ``norm(direction) / max|direction|``.
    """
    direction = np.asarray(direction, dtype=np.float64)
    return time * _norm(direction, "linf") / _norm(direction, norm_kind)
