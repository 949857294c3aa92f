"""Command line entry point: ``acts {train-toy,score,attack,evaluate}``.

Exit codes: 0 success, 1 validation error, 2 runtime/numeric error.
Logs go to stderr; results only to files under ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .attacks import METHODS, make_config, run_attack
from .dataio import dumps_canonical, load_dataset, load_model, save_model
from .evaluation import ActsConfig, run_experiment, write_records_csv, write_summary_json
from .exceptions import ComputationError, ConfigError, ValidationError
from .metric import NORMS, acts_from_deltas
from .network import Network, predict_batch
from .toy import run_toy_experiment, write_grid_csv

logger = logging.getLogger("acts")

DEFAULT_LEVELS = (0.00039, 0.00078, 0.00117)


@dataclass
class RunConfig:
    command: str
    model: Path | None
    data: Path | None
    attack: str
    eps: list
    steps: int | None
    step_size: float | None
    k: int
    norm: str
    bins: int
    seed: int
    threads: int
    out: Path

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("--eps must be strictly increasing")
        if any(e <= 0 for e in self.eps):
            raise ConfigError("--eps values must be positive")
        if self.threads < 1:
            raise ConfigError("--threads must be at least 1")
        for name in ("model", "data"):
            p = getattr(self, name)
            if p is not None and not p.is_file():
                raise ConfigError(f"--{name}: {p} is not a readable file")
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"--out: cannot create {self.out}: {exc}") from None
        if not os.access(self.out, os.W_OK):
            raise ConfigError(f"--out: {self.out} is not writable")


def _eps_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", type=Path, default=None,
                        help="model JSON file (default: none)")
    common.add_argument("--data", type=Path, default=None,
                        help="dataset CSV with header id,label,f0,... (default: none)")
    common.add_argument("--attack", choices=METHODS, default="fgsm",
                        help="attack method (default: fgsm)")
    common.add_argument("--eps", type=_eps_list, default=list(DEFAULT_LEVELS),
                        help="comma-separated increasing L-inf budgets "
                             "(default: 0.00039,0.00078,0.00117)")
    common.add_argument("--steps", type=int, default=None,
                        help="attack steps (default: 1 for fgsm, 3 otherwise)")
    common.add_argument("--step-size", type=float, default=None,
                        help="per-step size (default: eps for fgsm, eps/2 otherwise)")
    common.add_argument("--k", type=int, default=10,
                        help="candidate classes, clipped to K-1 (default: 10)")
    common.add_argument("--norm", choices=NORMS, default="l2",
                        help="norm in the speed denominator (default: l2)")
    common.add_argument("--bins", type=int, default=100,
                        help="histogram bins for overlap (default: 100)")
    common.add_argument("--seed", type=int, default=0, help="base seed (default: 0)")
    common.add_argument("--threads", type=int, default=1,
                        help="per-sample worker threads (default: 1)")
    common.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory (default: ./out)")
    common.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="stderr log level (default: INFO)")

    parser = argparse.ArgumentParser(
        prog="acts", description="Converging-time robustness scores for dense classifiers."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-toy", parents=[common],
                       help="train the AND-gate model and write its score grid")
    p.add_argument("--grid-resolution", type=int, default=101,
                   help="grid points per axis (default: 101)")
    p.add_argument("--fgsm-eps", type=float, default=0.1,
                   help="FGSM budget used for grid scoring (default: 0.1)")

    sub.add_parser("score", parents=[common],
                   help="per-sample scores (uses the smallest --eps)")
    sub.add_parser("attack", parents=[common],
                   help="attack correctly classified samples at every --eps")

    p = sub.add_parser("evaluate", parents=[common],
                       help="scores + attacks + overlap / flip / mean report")
    p.add_argument("--acts-eps", type=float, default=None,
                   help="separate budget for score estimation "
                        "(default: reuse the smallest --eps trace)")
    p.add_argument("--per-level", action="store_true",
                   help="recompute scores from each level's own trace for overlap")
    return parser


def _config(args) -> RunConfig:
    return RunConfig(args.command, args.model, args.data, args.attack, args.eps,
                     args.steps, args.step_size, args.k, args.norm, args.bins,
                     args.seed, args.threads, args.out)


def _need(cfg: RunConfig, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigError(f"--{name} is required for {cfg.command}")


def _clip_k(cfg: RunConfig, net: Network) -> int:
    k = min(cfg.k, net.num_classes - 1)
    if k != cfg.k:
        logger.info("k=%d clipped to %d (model has %d classes)", cfg.k, k, net.num_classes)
    return k


def _load(cfg: RunConfig):
    _need(cfg, "model", "data")
    net = load_model(cfg.model)
    ds = load_dataset(cfg.data, net.num_inputs, net.num_classes)
    return net, ds


def cmd_train_toy(args) -> int:
    cfg = _config(args)
    result = run_toy_experiment(args.grid_resolution, args.fgsm_eps, cfg.seed)
    save_model(result.network, cfg.out / "model.json")
    write_grid_csv(result, cfg.out / "grid.csv")
    print(f"test accuracy: {result.accuracy:.4f}", file=sys.stderr)
    logger.info("wrote %s and %s", cfg.out / "model.json", cfg.out / "grid.csv")
    return 0


def score_rows(net: Network, ds, cfg: RunConfig, k: int) -> list:
    """(sample_id, score, winner) for every sample, attacking away from the
    predicted class at the smallest budget."""
    attack = make_config(cfg.attack, cfg.eps[0], cfg.steps, cfg.step_size, cfg.seed)
    preds = predict_batch(net, ds.features)
    rows = []
    for i, (sid, x, t) in enumerate(zip(ds.ids, ds.features, preds)):
        per_sample = make_config(attack.method, attack.epsilon, attack.steps,
                                 attack.step_size, cfg.seed + i)
        trace = run_attack(net, x, int(t), per_sample)
        try:
            res = acts_from_deltas(net, x, trace.deltas, k, cfg.norm)
        except ValidationError as exc:
            raise type(exc)(f"sample {sid}: {exc}") from None
        rows.append((sid, res.score, res.winner))
    return rows


def cmd_score(args) -> int:
    cfg = _config(args)
    net, ds = _load(cfg)
    rows = score_rows(net, ds, cfg, _clip_k(cfg, net))
    path = cfg.out / "scores.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "acts_score", "winner"])
        for sid, score, winner in rows:
            w.writerow([sid, "inf" if math.isinf(score) else repr(score), winner])
    if all(math.isinf(s) for _, s, _ in rows):
        logger.warning("every sample is capped (no candidate class closes in)")
    logger.info("wrote %s", path)
    return 0


def cmd_attack(args) -> int:
    cfg = _config(args)
    net, ds = _load(cfg)
    preds = predict_batch(net, ds.features)
    traces, rows = [], []
    for e in cfg.eps:
        base = make_config(cfg.attack, e, cfg.steps, cfg.step_size, cfg.seed)
        for i, (sid, x, t, p) in enumerate(zip(ds.ids, ds.features, ds.labels, preds)):
            if p != t:
                continue
            tr = run_attack(net, x, int(t), make_config(
                base.method, e, base.steps, base.step_size, cfg.seed + i))
            linf = float(abs(tr.x_adv - tr.x0).max())
            rows.append([sid, repr(e), int(t), int(tr.success), tr.adv_label, repr(linf)])
            traces.append({"sample_id": sid, **tr.to_dict()})
    skipped = len(ds) - int((preds == ds.labels).sum())
    if skipped:
        logger.info("skipped %d misclassified samples", skipped)
    with (cfg.out / "attack.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "epsilon", "true_label", "success", "adv_label", "linf"])
        w.writerows(rows)
    (cfg.out / "traces.json").write_text(dumps_canonical(traces), encoding="utf-8")
    logger.info("wrote %s and %s", cfg.out / "attack.csv", cfg.out / "traces.json")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    net, ds = _load(cfg)
    attack_cfgs = [make_config(cfg.attack, e, cfg.steps, cfg.step_size, cfg.seed)
                   for e in cfg.eps]
    acts_cfg = ActsConfig(k=_clip_k(cfg, net), norm_kind=cfg.norm, bins=cfg.bins,
                          acts_epsilon=args.acts_eps, per_level=args.per_level)
    report = run_experiment(net, ds, attack_cfgs, acts_cfg, threads=cfg.threads)
    write_records_csv(report, cfg.out / "records.csv")
    write_summary_json(report, cfg.out / "summary.json")
    for i, e in enumerate(report.epsilons, start=1):
        ov = report.overlap_pct[e]
        logger.info("N%d eps=%g overlap=%s", i, e, "n/a" if ov is None else f"{ov:.4f}")
    return 0


COMMANDS = {
    "train-toy": cmd_train_toy,
    "score": cmd_score,
    "attack": cmd_attack,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        logger.error("%s", exc)
        return 1
    except (ComputationError, FloatingPointError) as exc:
        logger.error("%s", exc)
        return 2
    except OSError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
