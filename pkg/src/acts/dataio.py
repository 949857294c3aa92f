"""Loading and saving datasets (CSV) and models (JSON).

Dataset CSV layout: a mandatory header ``id,label,f0,...,f{M-1}``; the
``id`` column is optional, row indices are used when it is missing.
Floats are written with ``repr`` so a save/load round trip is bit exact.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    InvalidLabelError,
    NonFiniteValueError,
    SchemaError,
    ValidationError,
)
from .network import DenseLayer, Network


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    ids: tuple

    def __post_init__(self):
        f = np.array(self.features, dtype=np.float64)
        lab = np.array(self.labels, dtype=np.int64)
        if f.ndim != 2 or lab.shape != (f.shape[0],) or len(self.ids) != f.shape[0]:
            raise DimensionMismatchError("features, labels and ids must have matching row counts")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("sample ids must be unique")
        if not np.all(np.isfinite(f)):
            raise NonFiniteValueError("features contain non-finite values")
        f.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))

    def __len__(self):
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


def load_dataset(path, expected_M: int | None = None, expected_K: int | None = None) -> Dataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise SchemaError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        has_id = header[0] == "id"
        rest = header[1:] if has_id else header
        if not rest or rest[0] != "label":
            raise SchemaError(f"{path}: header must start with 'id,label' or 'label'")
        feat_cols = rest[1:]
        if feat_cols != [f"f{i}" for i in range(len(feat_cols))]:
            raise SchemaError(f"{path}: feature columns must be named f0..f{{M-1}}")
        m = len(feat_cols)
        if m == 0:
            raise SchemaError(f"{path}: no feature columns")
        if expected_M is not None and m != expected_M:
            raise DimensionMismatchError(
                f"{path}: dataset has {m} features, model expects {expected_M}"
            )

        ids, labels, rows = [], [], []
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DimensionMismatchError(
                    f"{path}, row {lineno}: expected {width} fields, got {len(row)}"
                )
            if has_id:
                sid, row = row[0], row[1:]
            else:
                sid = str(len(ids))
            try:
                label = int(row[0])
            except ValueError:
                raise InvalidLabelError(f"{path}, row {lineno}: label {row[0]!r} is not an integer") from None
            if label < 0 or (expected_K is not None and label >= expected_K):
                raise InvalidLabelError(
                    f"{path}, row {lineno}: label {label} out of range"
                    + (f" [0, {expected_K})" if expected_K is not None else "")
                )
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError:
                raise SchemaError(f"{path}, row {lineno}: unparseable feature value") from None
            if not all(math.isfinite(v) for v in vals):
                raise NonFiniteValueError(f"{path}, row {lineno}: non-finite feature value")
            ids.append(sid)
            labels.append(label)
            rows.append(vals)
    if not rows:
        raise ValidationError(f"{path}: dataset has no rows")
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: duplicate sample ids")
    return Dataset(np.array(rows), np.array(labels), tuple(ids))


def save_dataset(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"] + [f"f{i}" for i in range(ds.num_features)])
        for sid, lab, row in zip(ds.ids, ds.labels, ds.features):
            w.writerow([sid, int(lab)] + [repr(float(v)) for v in row])


# -- models ----------------------------------------------------------------

def network_to_dict(net: Network) -> dict:
    return {
        "num_inputs": net.num_inputs,
        "num_classes": net.num_classes,
        "score_transform": net.score_transform,
        "normalization": {"mean": net.mean.tolist(), "std": net.std.tolist()},
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
    }


def _require(doc, key, kind, where):
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaError(f"{where}: missing key {key!r}")
    val = doc[key]
    if not isinstance(val, kind) or isinstance(val, bool):
        raise SchemaError(f"{where}: {key!r} has the wrong type")
    return val


def _matrix(val, where):
    try:
        arr = np.array(val, dtype=np.float64)
    except (TypeError, ValueError):
        raise SchemaError(f"{where}: not a rectangular numeric array") from None
    return arr


def network_from_dict(doc: dict) -> Network:
    m = _require(doc, "num_inputs", int, "model")
    k = _require(doc, "num_classes", int, "model")
    transform = _require(doc, "score_transform", str, "model")
    norm = _require(doc, "normalization", dict, "model")
    mean = _matrix(_require(norm, "mean", list, "normalization"), "normalization.mean")
    std = _matrix(_require(norm, "std", list, "normalization"), "normalization.std")
    raw_layers = _require(doc, "layers", list, "model")
    layers = []
    for i, item in enumerate(raw_layers):
        where = f"layers[{i}]"
        w = _matrix(_require(item, "weights", list, where), where + ".weights")
        b = _matrix(_require(item, "bias", list, where), where + ".bias")
        act = _require(item, "activation", str, where)
        layers.append(DenseLayer(w, b, act))
    if not layers:
        raise SchemaError("model: no layers")
    net = Network(tuple(layers), mean, std, transform)
    if net.num_inputs != m or net.num_classes != k:
        raise DimensionMismatchError(
            f"model declares {m} inputs / {k} classes but layers give "
            f"{net.num_inputs} / {net.num_classes}"
        )
    return net


def dumps_canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def save_model(net: Network, path) -> None:
    Path(path).write_text(dumps_canonical(network_to_dict(net)), encoding="utf-8")


def load_model(path) -> Network:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    try:
        return network_from_dict(doc)
    except ConfigError as exc:
        raise type(exc)(f"{path}: {exc}") from None
