"""Untargeted L-infinity white-box attacks: FGSM, BIM and PGD.

Each attack returns an :class:`AttackTrace` holding every *effective*
per-step perturbation, i.e. the change actually applied after projecting
onto the epsilon ball and the ``[0, 1]`` box. Summing the deltas therefore
reconstructs the adversarial input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError
from .network import Network, _as_input, _check_label, classify, loss_gradient

METHODS = ("fgsm", "bim", "pgd")


@dataclass(frozen=True)
class AttackConfig:
    method: str
    epsilon: float
    steps: int = 1
    step_size: float | None = None
    seed: int = 0

    def __post_init__(self):
        method = str(self.method).lower()
        if method not in METHODS:
            raise ConfigError(f"unknown attack method {self.method!r}")
        object.__setattr__(self, "method", method)
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigError("epsilon must be a positive finite number")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError("steps must be a positive integer")
        object.__setattr__(self, "steps", int(self.steps))
        if method == "fgsm" and self.steps != 1:
            raise ConfigError("FGSM is a single-step attack (steps must be 1)")
        if self.step_size is None:
            object.__setattr__(self, "step_size", float(self.epsilon))
        if not (np.isfinite(self.step_size) and self.step_size > 0):
            raise ConfigError("step_size must be a positive finite number")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "epsilon": float(self.epsilon),
            "steps": self.steps,
            "step_size": float(self.step_size),
            "seed": int(self.seed),
        }


def make_config(method, epsilon, steps=None, step_size=None, seed=0) -> AttackConfig:
    """Fill in the usual defaults: FGSM takes one full step; BIM and PGD
    take three steps of ``epsilon / 2``."""
    method = str(method).lower()
    if method == "fgsm":
        return AttackConfig("fgsm", epsilon, 1 if steps is None else steps,
                            epsilon if step_size is None else step_size, seed)
    return AttackConfig(method, epsilon, 3 if steps is None else steps,
                        epsilon / 2 if step_size is None else step_size, seed)


@dataclass(frozen=True)
class AttackTrace:
    x0: np.ndarray
    deltas: list
    x_adv: np.ndarray
    success: bool
    adv_label: int
    true_label: int
    config: AttackConfig = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "deltas": [d.tolist() for d in self.deltas],
            "x_adv": self.x_adv.tolist(),
            "success": bool(self.success),
            "adv_label": int(self.adv_label),
            "true_label": int(self.true_label),
            "config": self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AttackTrace":
        cfg = AttackConfig(**doc["config"])
        return cls(
            x0=np.asarray(doc["x0"], dtype=np.float64),
            deltas=[np.asarray(d, dtype=np.float64) for d in doc["deltas"]],
            x_adv=np.asarray(doc["x_adv"], dtype=np.float64),
            success=bool(doc["success"]),
            adv_label=int(doc["adv_label"]),
            true_label=int(doc["true_label"]),
            config=cfg,
        )


def _finish(net, x0, x, deltas, t_true, cfg) -> AttackTrace:
    adv = classify(net, x)
    return AttackTrace(x0, deltas, x, adv != t_true, adv, t_true, cfg)


def fgsm(net: Network, x, t_true, cfg: AttackConfig) -> AttackTrace:
    x0 = _as_input(net, x).copy()
    t_true = _check_label(net, t_true)
    step = cfg.epsilon * np.sign(loss_gradient(net, x0, t_true))
    x_adv = np.clip(x0 + step, 0.0, 1.0)
    return _finish(net, x0, x_adv, [x_adv - x0], t_true, cfg)


def _iterate(net, x0, x, t_true, cfg, deltas):
    lo, hi = x0 - cfg.epsilon, x0 + cfg.epsilon
    for _ in range(cfg.steps):
        g = loss_gradient(net, x, t_true)
        # ball first, then box
        nxt = np.clip(np.clip(x + cfg.step_size * np.sign(g), lo, hi), 0.0, 1.0)
        deltas.append(nxt - x)
        x = nxt
    return x


def bim(net: Network, x, t_true, cfg: AttackConfig) -> AttackTrace:
    x0 = _as_input(net, x).copy()
    t_true = _check_label(net, t_true)
    deltas: list = []
    x_adv = _iterate(net, x0, x0, t_true, cfg, deltas)
    return _finish(net, x0, x_adv, deltas, t_true, cfg)


def pgd(net: Network, x, t_true, cfg: AttackConfig) -> AttackTrace:
    x0 = _as_input(net, x).copy()
    t_true = _check_label(net, t_true)
    rng = np.random.default_rng(cfg.seed)
    start = np.clip(
        x0 + rng.uniform(-cfg.epsilon, cfg.epsilon, size=x0.shape), 0.0, 1.0
    )
    deltas = [start - x0]
    x_adv = _iterate(net, x0, start, t_true, cfg, deltas)
    return _finish(net, x0, x_adv, deltas, t_true, cfg)


_DISPATCH = {"fgsm": fgsm, "bim": bim, "pgd": pgd}


def run_attack(net: Network, x, t_true, cfg: AttackConfig) -> AttackTrace:
    return _DISPATCH[cfg.method](net, x, t_true, cfg)
