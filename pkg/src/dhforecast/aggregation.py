"""Online aggregation of expert forecasts.

Three weighting rules are provided:

* ``EWA`` -- exponentially weighted average: ``w_i ∝ w_i0 * exp(-eta * L_i)``
  with ``L_i`` the cumulative loss of expert ``i``.
* ``FIXED_SHARE`` -- an exponential update on the latest loss followed by
  mixing a fraction ``alpha`` of the uniform distribution back in, so every
  expert keeps at least ``alpha / N`` weight.
* ``ML_POLY`` -- polynomially weighted average with one learning rate per
  expert, ``w_i ∝ eta_i * max(R_i, 0)`` with ``eta_i = 1 / (1 + sum r_i^2)``,
  where ``r_i`` is the instantaneous regret against expert ``i``.

All rules consume losses in [0, 1].  Daily MAPE is mapped there with
``min(MAPE / 100, 1)``; the raw percentages are kept for reporting only.
The weights held in the state after round ``k`` are the ones used to combine
the advice of round ``k + 1``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, ValidationError, ZeroActual
from .timeseries import HOURS_PER_DAY, DailyBlock

SIMPLEX_TOL = 1e-12


class Rule(str, enum.Enum):
    EWA = "ewa"
    FIXED_SHARE = "fs"
    ML_POLY = "mlpoly"


def default_eta(n_experts: int, n_rounds: int) -> float:
    """Learning rate sqrt(8 ln N / T) that balances the EWA regret bound."""
    if n_experts < 2:
        return 0.0
    return math.sqrt(8.0 * math.log(n_experts) / max(n_rounds, 1))


@dataclass
class AggregatorConfig:
    rule: Rule = Rule.FIXED_SHARE
    eta: float | None = None  # None: default_eta(N, expected_rounds)
    alpha: float = 0.05
    n_experts: int = 8
    initial_weights: list[float] | None = None
    expected_rounds: int = 200
    paper_literal: bool = False

    def __post_init__(self):
        self.rule = Rule(self.rule)

    def validate(self) -> None:
        if self.n_experts < 1:
            raise ValidationError("n_experts must be >= 1")
        if self.eta is not None and not self.eta >= 0:
            raise ValidationError("eta must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError("alpha must lie in [0, 1]")
        if self.initial_weights is not None:
            w = np.asarray(self.initial_weights, dtype=float)
            if w.shape != (self.n_experts,):
                raise ValidationError("initial_weights must have one entry per expert")
            if np.any(w < 0) or w.sum() > 1.0 + SIMPLEX_TOL or w.sum() <= 0:
                raise ValidationError("initial_weights must be >= 0 with 0 < sum <= 1")

    @property
    def learning_rate(self) -> float:
        if self.eta is not None:
            return float(self.eta)
        return default_eta(self.n_experts, self.expected_rounds)


@dataclass(frozen=True, eq=False)
class LossRecord:
    """Scaled losses of one round; raw MAPE values ride along when known."""

    round: int
    expert: np.ndarray
    forecaster: float | None = None
    expert_raw: np.ndarray | None = None
    forecaster_raw: float | None = None

    def __post_init__(self):
        e = np.asarray(self.expert, dtype=np.float64)
        if np.any(~np.isfinite(e)) or np.any(e < 0):
            raise ValidationError("losses must be finite and non-negative")
        object.__setattr__(self, "expert", e)

    @classmethod
    def from_mape(cls, k: int, expert_mape, forecaster_mape: float | None = None) -> LossRecord:
        raw = np.asarray(expert_mape, dtype=np.float64)
        return cls(
            k,
            scale_loss(raw),
            None if forecaster_mape is None else float(scale_loss(forecaster_mape)),
            raw,
            forecaster_mape,
        )


@dataclass(frozen=True, eq=False)
class AggregatorState:
    weights: np.ndarray
    prior: np.ndarray
    cumulative_losses: np.ndarray
    forecaster_cumulative: float = 0.0
    round: int = 0
    regret_history: tuple[float, ...] = ()
    regret_sum: np.ndarray | None = None  # ML-Poly cumulative regret R_i
    regret_sq: np.ndarray | None = None  # ML-Poly sum of squared regrets S_i

    @property
    def n_experts(self) -> int:
        return int(self.weights.size)


def scale_loss(mape_value):
    """Map a MAPE percentage into [0, 1] for the weight updates."""
    return np.minimum(np.asarray(mape_value, dtype=np.float64) / 100.0, 1.0)


def initial_state(config: AggregatorConfig) -> AggregatorState:
    config.validate()
    n = config.n_experts
    if config.initial_weights is None:
        prior = np.full(n, 1.0 / n)
    else:
        w = np.asarray(config.initial_weights, dtype=np.float64)
        prior = w / w.sum()
    zeros = np.zeros(n)
    return AggregatorState(prior.copy(), prior, zeros, regret_sum=zeros, regret_sq=zeros)


def _normalize_exp(log_w: np.ndarray) -> np.ndarray:
    finite = np.isfinite(log_w)
    shifted = np.where(finite, log_w - np.max(log_w[finite]), -np.inf)
    w = np.exp(shifted)
    return w / w.sum()


def _log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def _account(state: AggregatorState, losses: LossRecord) -> tuple[np.ndarray, float, float]:
    if losses.expert.size != state.n_experts:
        raise LengthMismatch(f"expected {state.n_experts} losses, got {losses.expert.size}")
    f_loss = losses.forecaster
    if f_loss is None:
        f_loss = float(state.weights @ losses.expert)
    cum = state.cumulative_losses + losses.expert
    f_cum = state.forecaster_cumulative + f_loss
    return cum, f_cum, f_loss


def _advance(state, weights, cum, f_cum, **extra) -> AggregatorState:
    regret = f_cum - float(np.min(cum))
    return replace(
        state,
        weights=weights,
        cumulative_losses=cum,
        forecaster_cumulative=f_cum,
        round=state.round + 1,
        regret_history=state.regret_history + (regret,),
        **extra,
    )


def update_ewa(state: AggregatorState, losses: LossRecord, eta: float) -> AggregatorState:
    cum, f_cum, _ = _account(state, losses)
    w = _normalize_exp(_log(state.prior) - eta * (cum - cum.min()))
    return _advance(state, w, cum, f_cum)


def update_fixed_share(
    state: AggregatorState,
    losses: LossRecord,
    eta: float,
    alpha: float,
    paper_literal: bool = False,
) -> AggregatorState:
    """Exponential step on the latest loss, then uniform mixing.

    With ``paper_literal`` the exponent uses the cumulative loss instead of
    the latest one while still multiplying by the previous weights, which
    counts past losses repeatedly; it exists only for comparison.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("alpha must lie in [0, 1]")
    cum, f_cum, _ = _account(state, losses)
    step = cum if paper_literal else losses.expert
    v = _normalize_exp(_log(state.weights) - eta * (step - step.min()))
    n = state.n_experts
    w = alpha / n + (1.0 - alpha) * v
    return _advance(state, w, cum, f_cum)


def update_mlpoly(state: AggregatorState, losses: LossRecord) -> AggregatorState:
    cum, f_cum, f_loss = _account(state, losses)
    r = f_loss - losses.expert
    R = state.regret_sum + r
    S = state.regret_sq + r * r
    rates = 1.0 / (1.0 + S)
    raw = state.prior * rates * np.maximum(R, 0.0)
    total = raw.sum()
    w = raw / total if total > 0 else state.prior.copy()
    return _advance(state, w, cum, f_cum, regret_sum=R, regret_sq=S)


def update(state: AggregatorState, losses: LossRecord, config: AggregatorConfig) -> AggregatorState:
    if config.rule is Rule.EWA:
        return update_ewa(state, losses, config.learning_rate)
    if config.rule is Rule.FIXED_SHARE:
        return update_fixed_share(
            state, losses, config.learning_rate, config.alpha, config.paper_literal
        )
    return update_mlpoly(state, losses)


def regret(state: AggregatorState) -> float:
    """Forecaster cumulative loss minus the best expert's cumulative loss."""
    if state.round < 1:
        raise ValidationError("regret is defined after the first round")
    return state.forecaster_cumulative - float(np.min(state.cumulative_losses))


def _as_values(block) -> np.ndarray:
    return block.values if isinstance(block, DailyBlock) else np.asarray(block, dtype=np.float64)


def mape(actual, forecast) -> float:
    """Mean absolute percentage error of two equal-length profiles, in percent."""
    a, f = _as_values(actual), _as_values(forecast)
    if a.shape != f.shape:
        raise LengthMismatch(f"actual has {a.size} values, forecast {f.size}")
    if np.any(a == 0):
        raise ZeroActual("MAPE undefined when an actual value is zero")
    return float(100.0 / a.size * np.sum(np.abs((a - f) / a)))


def combine(weights, advice: Sequence) -> np.ndarray:
    """Hour-wise convex combination of the experts' daily profiles."""
    w = np.asarray(weights, dtype=np.float64)
    rows = [_as_values(b) for b in advice]
    if w.size != len(rows):
        raise LengthMismatch(f"{w.size} weights for {len(rows)} experts")
    if len({r.size for r in rows}) > 1:
        raise LengthMismatch("advice blocks differ in length")
    return w @ np.vstack(rows)


def combine_block(weights, advice: Sequence[DailyBlock]) -> DailyBlock:
    first = advice[0]
    return DailyBlock(first.day_index, first.day, combine(weights, advice))


def write_weight_trajectory(path, rows) -> None:
    """rows: iterable of (round, expert, weight, loss_raw, loss_scaled)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "expert", "weight", "loss_raw", "loss_scaled"])
        for k, name, weight, raw, scaled in rows:
            w.writerow([k, name, repr(float(weight)), repr(float(raw)), repr(float(scaled))])


def write_regret_trajectory(path, rows) -> None:
    """rows: iterable of (round, forecaster_loss, regret)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "forecaster_loss", "regret"])
        for k, loss, reg in rows:
            w.writerow([k, repr(float(loss)), repr(float(reg))])


__all__ = [
    "HOURS_PER_DAY",
    "AggregatorConfig",
    "AggregatorState",
    "LossRecord",
    "Rule",
    "combine",
    "combine_block",
    "default_eta",
    "initial_state",
    "mape",
    "regret",
    "scale_loss",
    "update",
    "update_ewa",
    "update_fixed_share",
    "update_mlpoly",
]
