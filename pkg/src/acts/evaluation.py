"""Evaluation protocol: score every correctly classified sample, attack it
at several noise levels, then measure how well the scores separate the
samples that fell from those that survived.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from .attacks import run_attack
from .dataio import Dataset, dumps_canonical
from .exceptions import (
    ConfigError,
    EmptyCohortError,
    IncompleteRecordError,
    UndefinedMeanError,
    UndefinedOverlapError,
)
from .metric import NORMS, acts_from_deltas
from .network import Network, predict_batch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActsConfig:
    """How scores are computed inside an experiment.

    ``acts_epsilon=None`` takes the attack steps from the lowest noise level;
    a number runs one extra attack at that budget just for scoring.
    ``per_level=True`` makes each level's overlap use the score recomputed
    from that level's own trace.
    """

    k: int = 10
    norm_kind: str = "l2"
    cap: float = math.inf
    bins: int = 100
    acts_epsilon: float | None = None
    per_level: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.norm_kind not in NORMS:
            raise ConfigError(f"norm must be one of {NORMS}")
        if self.bins < 1:
            raise ConfigError("bins must be at least 1")
        if self.acts_epsilon is not None and not self.acts_epsilon > 0:
            raise ConfigError("acts_epsilon must be positive")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "norm_kind": self.norm_kind,
            "cap": "inf" if math.isinf(self.cap) else self.cap,
            "bins": self.bins,
            "acts_epsilon": self.acts_epsilon,
            "per_level": self.per_level,
        }


@dataclass(frozen=True)
class LevelOutcome:
    success: bool
    adv_label: int
    acts_score: float = math.nan


@dataclass
class SampleRecord:
    sample_id: str
    true_label: int
    clean_pred: int
    acts_score: float
    acts_winner: int
    capped: bool = False
    outcomes: dict = field(default_factory=dict)
    index: int = 0


@dataclass
class EvalReport:
    records: list
    method: str
    epsilons: list
    overlap_pct: dict
    flip_counts: dict
    mean_acts: float | None
    capped_count: int
    bin_spec: tuple
    medians: dict
    dataset_size: int
    config: dict = field(default_factory=dict)


# -- aggregate measures ----------------------------------------------------

def overlap_percent(success_scores, fail_scores, bins: int = 100, range=None) -> float:
    """Shared histogram mass of two score samples, S_o / S_a.

    Both samples are binned on the same equal-width grid over ``range``
    (default: min/max of their union). S_o sums the per-bin minimum of the
    two counts; S_a is the total number of scores.
    """
    a = np.asarray(success_scores, dtype=np.float64).ravel()
    b = np.asarray(fail_scores, dtype=np.float64).ravel()
    both = np.concatenate([a, b])
    if both.size == 0:
        raise UndefinedOverlapError("no scores to compare")
    if not np.all(np.isfinite(both)):
        raise ConfigError("capped (infinite) scores must be removed before binning")
    if bins < 1:
        raise ConfigError("bins must be at least 1")
    lo, hi = (both.min(), both.max()) if range is None else map(float, range)
    if both.min() < lo or both.max() > hi:
        raise ConfigError("scores fall outside the binning range")

    def counts(v):
        if hi == lo:
            idx = np.zeros(v.size, dtype=np.int64)
        else:
            idx = np.floor((v - lo) / (hi - lo) * bins).astype(np.int64)
            idx = np.clip(idx, 0, bins - 1)
        return np.bincount(idx, minlength=bins)

    s_o = np.minimum(counts(a), counts(b)).sum()
    return float(s_o / both.size)


def _level_score(rec: SampleRecord, eps, per_level: bool) -> float:
    return rec.outcomes[eps].acts_score if per_level else rec.acts_score


def detect_flips(records, level_pairs) -> dict:
    """Count samples attacked successfully at the lower budget of a pair
    but not at the higher one."""
    out = {}
    for lower, higher in level_pairs:
        n = 0
        for rec in records:
            if lower not in rec.outcomes or higher not in rec.outcomes:
                raise IncompleteRecordError(
                    f"sample {rec.sample_id} lacks outcomes for ({lower}, {higher})"
                )
            if rec.outcomes[lower].success and not rec.outcomes[higher].success:
                n += 1
        out[(lower, higher)] = n
    return out


def mean_acts(records) -> float:
    scores = [r.acts_score for r in records if not r.capped and math.isfinite(r.acts_score)]
    if not scores:
        raise UndefinedMeanError("every record is capped")
    return float(np.mean(scores))


# -- the experiment --------------------------------------------------------

def _score_sample(net, x, label, index, sample_id, cfgs, acts_cfg):
    outcomes = {}
    traces = {}
    for cfg in cfgs:
        trace = run_attack(net, x, label, replace(cfg, seed=cfg.seed + index))
        traces[cfg.epsilon] = trace
        level = acts_from_deltas(net, x, trace.deltas, acts_cfg.k,
                                 acts_cfg.norm_kind, acts_cfg.cap)
        outcomes[cfg.epsilon] = LevelOutcome(trace.success, trace.adv_label, level.score)
    if acts_cfg.acts_epsilon is None:
        deltas = traces[cfgs[0].epsilon].deltas
    else:
        probe = replace(cfgs[0], epsilon=acts_cfg.acts_epsilon,
                        step_size=cfgs[0].step_size * acts_cfg.acts_epsilon / cfgs[0].epsilon,
                        seed=cfgs[0].seed + index)
        deltas = run_attack(net, x, label, probe).deltas
    res = acts_from_deltas(net, x, deltas, acts_cfg.k, acts_cfg.norm_kind, acts_cfg.cap)
    return SampleRecord(sample_id, int(label), res.t, res.score, res.winner,
                        res.capped, outcomes, index)


def run_experiment(net: Network, dataset: Dataset, attack_cfgs, acts_cfg: ActsConfig | None = None,
                   threads: int = 1) -> EvalReport:
    acts_cfg = acts_cfg or ActsConfig()
    cfgs = sorted(attack_cfgs, key=lambda c: c.epsilon)
    if not cfgs:
        raise ConfigError("at least one attack configuration is required")
    if len({c.method for c in cfgs}) != 1:
        raise ConfigError("attack configurations must share one method")
    eps = [c.epsilon for c in cfgs]
    if len(set(eps)) != len(eps):
        raise ConfigError("noise levels must be distinct")
    if dataset.num_features != net.num_inputs:
        raise ConfigError("dataset width does not match the model")

    preds = predict_batch(net, dataset.features)
    cohort = np.flatnonzero(preds == dataset.labels)
    if cohort.size == 0:
        raise EmptyCohortError("the model misclassifies every sample")
    logger.info("cohort: %d of %d samples correctly classified", cohort.size, len(dataset))

    def work(i):
        return _score_sample(net, dataset.features[i], int(dataset.labels[i]), int(i),
                             dataset.ids[i], cfgs, acts_cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(work, cohort))
    else:
        records = [work(i) for i in cohort]
    records.sort(key=lambda r: r.index)
    return summarize(records, cfgs, acts_cfg, len(dataset))


def summarize(records, cfgs, acts_cfg: ActsConfig, dataset_size: int) -> EvalReport:
    eps = [c.epsilon for c in cfgs]
    per_level = acts_cfg.per_level

    def usable(v):
        # capped scores have no bin
        return math.isfinite(v) and v < acts_cfg.cap

    finite = [
        _level_score(r, e, per_level) for r in records for e in eps
        if usable(_level_score(r, e, per_level))
    ]
    lo, hi = (min(finite), max(finite)) if finite else (math.nan, math.nan)

    overlap, medians = {}, {}
    for e in eps:
        succ = [_level_score(r, e, per_level) for r in records if r.outcomes[e].success]
        fail = [_level_score(r, e, per_level) for r in records if not r.outcomes[e].success]
        succ = [v for v in succ if usable(v)]
        fail = [v for v in fail if usable(v)]
        try:
            overlap[e] = overlap_percent(succ, fail, acts_cfg.bins, (lo, hi))
        except UndefinedOverlapError:
            overlap[e] = None
        medians[e] = (
            float(np.median(succ)) if succ else None,
            float(np.median(fail)) if fail else None,
            sum(r.outcomes[e].success for r in records),
        )

    flips = detect_flips(records, list(combinations(eps, 2)))
    try:
        mean = mean_acts(records)
    except UndefinedMeanError:
        logger.warning("every record is capped; mean score undefined")
        mean = None

    return EvalReport(
        records=records,
        method=cfgs[0].method,
        epsilons=eps,
        overlap_pct=overlap,
        flip_counts=flips,
        mean_acts=mean,
        capped_count=sum(r.capped for r in records),
        bin_spec=(lo, hi, acts_cfg.bins),
        medians=medians,
        dataset_size=dataset_size,
        config={
            "attack": [c.to_dict() for c in cfgs],
            "acts": acts_cfg.to_dict(),
        },
    )


# -- report files ----------------------------------------------------------

def _num(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return None
    if math.isinf(v):
        return "inf"
    return v


def csv_columns(n_levels: int) -> list:
    cols = ["sample_id", "true_label", "clean_pred", "acts_score", "acts_winner", "capped"]
    for i in range(1, n_levels + 1):
        cols += [f"success_N{i}", f"adv_label_N{i}", f"acts_score_N{i}"]
    return cols


def _fmt_score(v: float) -> str:
    return "inf" if math.isinf(v) else repr(float(v))


def write_records_csv(report: EvalReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_columns(len(report.epsilons)))
        for r in report.records:
            row = [r.sample_id, r.true_label, r.clean_pred, _fmt_score(r.acts_score),
                   r.acts_winner, int(r.capped)]
            for e in report.epsilons:
                o = r.outcomes[e]
                row += [int(o.success), o.adv_label, _fmt_score(o.acts_score)]
            w.writerow(row)


def report_summary(report: EvalReport) -> dict:
    levels = []
    for i, e in enumerate(report.epsilons, start=1):
        med_s, med_f, n_succ = report.medians[e]
        levels.append({
            "name": f"N{i}",
            "epsilon": e,
            "overlap_pct": report.overlap_pct[e],
            "n_success": n_succ,
            "n_fail": len(report.records) - n_succ,
            "median_acts_success": med_s,
            "median_acts_fail": med_f,
        })
    doc = {
        "method": report.method,
        "dataset_size": report.dataset_size,
        "cohort_size": len(report.records),
        "levels": levels,
        "mean_acts": report.mean_acts,
        "capped_count": report.capped_count,
        "bins": {
            "min": _num(report.bin_spec[0]),
            "max": _num(report.bin_spec[1]),
            "count": report.bin_spec[2],
        },
        "config": report.config,
    }
    if len(report.epsilons) > 1:
        doc["flips"] = [
            {"lower": lo, "higher": hi, "count": n}
            for (lo, hi), n in report.flip_counts.items()
        ]
    return doc


SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["method", "dataset_size", "cohort_size", "levels", "mean_acts",
                 "capped_count", "bins", "config"],
    "additionalProperties": False,
    "properties": {
        "method": {"enum": ["fgsm", "bim", "pgd"]},
        "dataset_size": {"type": "integer", "minimum": 1},
        "cohort_size": {"type": "integer", "minimum": 1},
        "levels": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "epsilon", "overlap_pct", "n_success", "n_fail",
                             "median_acts_success", "median_acts_fail"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "epsilon": {"type": "number", "exclusiveMinimum": 0},
                    "overlap_pct": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                    "n_success": {"type": "integer", "minimum": 0},
                    "n_fail": {"type": "integer", "minimum": 0},
                    "median_acts_success": {"type": ["number", "null"]},
                    "median_acts_fail": {"type": ["number", "null"]},
                },
            },
        },
        "flips": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["lower", "higher", "count"],
                "additionalProperties": False,
                "properties": {
                    "lower": {"type": "number"},
                    "higher": {"type": "number"},
                    "count": {"type": "integer", "minimum": 0},
                },
            },
        },
        "mean_acts": {"type": ["number", "null"], "minimum": 0},
        "capped_count": {"type": "integer", "minimum": 0},
        "bins": {
            "type": "object",
            "required": ["min", "max", "count"],
            "properties": {
                "min": {"type": ["number", "null"]},
                "max": {"type": ["number", "null"]},
                "count": {"type": "integer", "minimum": 1},
            },
        },
        "config": {"type": "object"},
    },
}


def write_summary_json(report: EvalReport, path) -> None:
    Path(path).write_text(dumps_canonical(report_summary(report)), encoding="utf-8")


def summary_json(report: EvalReport) -> str:
    return json.dumps(report_summary(report), sort_keys=True)
