"""Exhaustive grid search with contiguous (time-ordered) K-fold validation."""

from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ForecastError, ValidationError
from ..features import FeatureMatrix
from . import ExpertSpec, Family, make_params, predict
from . import fit as fit_expert

logger = logging.getLogger(__name__)


@dataclass
class GridSearchResult:
    family: Family
    param_names: tuple[str, ...]
    best_params: dict[str, Any]
    cv_scores: dict[tuple, float] = field(default_factory=dict)
    folds: int = 5

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*self.param_names, "mean_score"])
            for combo, score in self.cv_scores.items():
                w.writerow([*(_fmt(v) for v in combo), repr(score)])


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return "x".join(str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def contiguous_folds(n: int, folds: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """(train, validation) index pairs; validation sets are consecutive blocks."""
    if folds < 2:
        raise ValidationError("folds must be >= 2")
    if n < folds:
        raise ValidationError(f"{n} rows cannot be split into {folds} folds")
    bounds = np.linspace(0, n, folds + 1).astype(int)
    idx = np.arange(n)
    return [
        (np.concatenate([idx[: bounds[f]], idx[bounds[f + 1] :]]), idx[bounds[f] : bounds[f + 1]])
        for f in range(folds)
    ]


def grid_search_cv(
    family: Family | str,
    grid: dict[str, list],
    train: FeatureMatrix,
    folds: int = 5,
    seed: int = 0,
    base_params: dict[str, Any] | None = None,
) -> GridSearchResult:
    """Score every grid point by mean validation MSE (kW^2) across folds.

    A grid point whose fit fails on any fold scores +inf.  Ties go to the
    point that comes first in grid order.
    """
    family = Family(family)
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValidationError("grid must have at least one candidate per parameter")
    names = tuple(grid)
    splits = contiguous_folds(len(train), folds)
    scores: dict[tuple, float] = {}
    best, best_score = None, math.inf
    for combo in itertools.product(*(grid[k] for k in names)):
        values = {**(base_params or {}), **dict(zip(names, combo))}
        spec = ExpertSpec(family, train.kind, make_params(family, **values), seed)
        losses = []
        try:
            for tr_idx, va_idx in splits:
                model = fit_expert(spec, train.take(tr_idx))
                val = train.take(va_idx)
                losses.append(float(np.mean((predict(model, val) - val.targets) ** 2)))
            score = float(np.mean(losses))
        except ForecastError as exc:
            logger.warning("grid point %s failed: %s", values, exc)
            score = math.inf
        key = tuple(tuple(v) if isinstance(v, list) else v for v in combo)
        scores[key] = score
        if best is None or score < best_score:
            best, best_score = dict(zip(names, combo)), score
    return GridSearchResult(family, names, best, scores, folds)
