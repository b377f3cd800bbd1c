"""Plain-text model files.

A model file is JSON Lines.  The first record describes the expert::

    {"record": "spec", "family": "etr", "feature_kind": "full", "params": {...}, "seed": 7, "n_train": 14592}

followed by one record per parameter block::

    {"record": "block", "name": "threshold", "dtype": "float64", "shape": [123], "data": [...]}

Floats are written with ``repr`` precision so a reload is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from . import ExpertModel, ExpertSpec, Family, make_params
from .linear import LinearState
from .mlp import NetState
from .standardize import Standardizer
from .svr import SVRState
from .trees import ForestState

_STATE_TYPES = {
    Family.LINEAR: LinearState,
    Family.EXTRA_TREES: ForestState,
    Family.NEURAL_NET: NetState,
    Family.SUPPORT_VECTOR: SVRState,
}


def _block(name: str, value) -> dict:
    arr = np.asarray(value)
    dtype = "int64" if np.issubdtype(arr.dtype, np.integer) else "float64"
    return {
        "record": "block",
        "name": name,
        "dtype": dtype,
        "shape": list(arr.shape),
        "data": arr.astype(dtype).reshape(-1).tolist(),
    }


def model_records(model: ExpertModel) -> list[dict]:
    spec = model.spec
    head = {
        "record": "spec",
        "family": spec.family.value,
        "feature_kind": spec.feature_kind.value,
        "params": asdict(spec.params),
        "seed": spec.seed,
        "n_train": model.n_train,
    }
    records = [head]
    for f in fields(model.state):
        value = getattr(model.state, f.name)
        if value is not None:
            records.append(_block(f.name, value))
    if model.x_scaler is not None:
        records += [
            _block("x_mean", model.x_scaler.mean),
            _block("x_scale", model.x_scaler.scale),
            _block("y_mean", model.y_scaler.mean),
            _block("y_scale", model.y_scaler.scale),
        ]
    return records


def save_model(model: ExpertModel, path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for rec in model_records(model):
            fh.write(json.dumps(rec) + "\n")


def load_model(path: str | Path) -> ExpertModel:
    lines = [json.loads(l) for l in Path(path).read_text().splitlines() if l.strip()]
    if not lines or lines[0].get("record") != "spec":
        raise ValidationError(f"{path}: first record must be the spec")
    head = lines[0]
    family = Family(head["family"])
    spec = ExpertSpec(
        family, head["feature_kind"], make_params(family, **head["params"]), int(head["seed"])
    )
    blocks = {}
    for rec in lines[1:]:
        arr = np.array(rec["data"], dtype=rec["dtype"]).reshape(rec["shape"])
        blocks[rec["name"]] = arr
    state_cls = _STATE_TYPES[family]
    kwargs = {}
    for f in fields(state_cls):
        if f.name in blocks:
            v = blocks.pop(f.name)
            kwargs[f.name] = v.item() if v.ndim == 0 else v
    state = state_cls(**kwargs)
    xs = ys = None
    if "x_mean" in blocks:
        xs = Standardizer(blocks["x_mean"], blocks["x_scale"])
        ys = Standardizer(blocks["y_mean"], blocks["y_scale"])
    return ExpertModel(spec, state, xs, ys, n_train=int(head.get("n_train", 0)))
