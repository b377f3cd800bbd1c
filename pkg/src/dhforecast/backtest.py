"""Walk-forward evaluation of the expert roster and the online forecaster.

Each test day runs through the same round: build every expert's 24 input
rows, collect their advice, combine it with the current weights, reveal the
actual load, score everyone with MAPE, update the weights and, when asked,
refit the experts with the new day added to their training rows.

Days lacking actual load or any expert's inputs are skipped with no weight
update, so the weights stay frozen through data outages.  An expert that
fails on a day is excluded from that day's combination and charged the worst
scaled loss of 1.0.
"""

from __future__ import annotations

import csv
import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Sequence

import numpy as np

from . import aggregation as agg
from .errors import EmptyRange, ForecastError, ValidationError, ZeroActual
from .experts import ExpertModel, ExpertSpec, Family, fit, predict
from .features import FeatureSetKind, build_matrix, forecast_inputs
from .timeseries import (
    HOURS_PER_DAY,
    HourlySeries,
    align,
    date_to_day,
    day_number,
    day_start,
    day_to_date,
    day_values,
    split_day,
)

logger = logging.getLogger(__name__)

FORECASTER = "Forecaster"
FAILED_LOSS = 1.0


class Retrain(str, enum.Enum):
    NONE = "none"
    DAILY = "daily"

    @property
    def label(self) -> str:
        return "no retraining" if self is Retrain.NONE else "daily retraining"


@dataclass
class BacktestConfig:
    train_fraction: float = 0.75
    aggregator: agg.AggregatorConfig = field(default_factory=agg.AggregatorConfig)
    retrain: Retrain = Retrain.NONE
    moving_average_window_days: int = 30
    peak_threshold_kw: float | None = 2700.0
    offset_hours: int = 0
    summary_range: tuple[date, date] | None = None
    jobs: int = 1

    def __post_init__(self):
        self.retrain = Retrain(self.retrain)

    def validate(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie in (0, 1)")
        if self.moving_average_window_days < 1:
            raise ValidationError("moving_average_window_days must be >= 1")
        if self.peak_threshold_kw is not None and not self.peak_threshold_kw > 0:
            raise ValidationError("peak_threshold_kw must be > 0")
        if self.jobs < 1:
            raise ValidationError("jobs must be >= 1")
        if self.summary_range is not None and self.summary_range[0] > self.summary_range[1]:
            raise ValidationError("summary_range is reversed")
        self.aggregator.validate()


@dataclass(frozen=True, eq=False)
class DayRecord:
    """One scored round.  ``weights`` are the ones used for the combination;
    failed experts have NaN advice and NaN MAPE."""

    round: int
    day: date
    actual: np.ndarray
    forecast: np.ndarray
    expert_mape: np.ndarray
    forecaster_mape: float
    weights: np.ndarray | None = None
    advice: np.ndarray | None = None
    losses: agg.LossRecord | None = None


@dataclass(frozen=True)
class SkippedDay:
    day: date
    reason: str


@dataclass
class BacktestReport:
    expert_names: list[str]
    retrain: Retrain
    records: list[DayRecord]
    skipped: list[SkippedDay] = field(default_factory=list)
    regret: list[float] = field(default_factory=list)
    forecaster_losses: list[float] = field(default_factory=list)

    @property
    def days(self) -> list[date]:
        return [r.day for r in self.records]


@dataclass(frozen=True)
class Summary:
    """Mean daily MAPE per expert plus the forecaster over scored days."""

    retrain: Retrain
    names: tuple[str, ...]
    mape: tuple[float, ...]
    n_days: tuple[int, ...]
    first: date
    last: date

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.mape))

    @property
    def forecaster(self) -> float:
        return self.as_dict()[FORECASTER]

    def best_expert(self) -> tuple[str, float]:
        rows = [(n, m) for n, m in zip(self.names, self.mape) if n != FORECASTER]
        return min(rows, key=lambda r: r[1])

    def family_table(self) -> dict[str, float]:
        """Best expert of each family plus the forecaster, in table order."""
        out: dict[str, float] = {}
        for fam in (Family.LINEAR, Family.EXTRA_TREES, Family.SUPPORT_VECTOR, Family.NEURAL_NET):
            vals = [m for n, m in zip(self.names, self.mape) if n.split("-")[0] == fam.label]
            if vals:
                out[fam.label] = min(vals)
        out[FORECASTER] = self.forecaster
        return out

    def format(self) -> str:
        table = self.family_table()
        head = f"{'':18s}" + "".join(f"{k:>12s}" for k in table)
        row = f"{self.retrain.label:18s}" + "".join(f"{v:11.2f}%" for v in table.values())
        return head + "\n" + row


# -- helpers ------------------------------------------------------------------


def _fit_all(specs, matrices, previous=None, jobs=1):
    """Fit every expert; a failure keeps ``previous[i]`` (or None)."""

    def one(i):
        spec = specs[i]
        warm = previous[i] if previous is not None else None
        try:
            return fit(spec, matrices[spec.feature_kind], warm_start=warm)
        except ForecastError as exc:
            logger.warning("fit of %s failed: %s", spec.name, exc)
            return warm

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, range(len(specs))))
    return [one(i) for i in range(len(specs))]


def _matrices(kinds, load, dt, temp, stop, offset_hours):
    past = load.between(None, stop)
    return {k: build_matrix(past, dt, temp, k, offset_hours=offset_hours) for k in kinds}


def _advise(models, specs, inputs):
    advice = np.full((len(models), HOURS_PER_DAY), np.nan)
    for i, (model, spec) in enumerate(zip(models, specs)):
        if model is None:
            continue
        try:
            advice[i] = predict(model, inputs[spec.feature_kind])
        except ForecastError as exc:
            logger.warning("%s: %s", spec.name, exc)
    return advice


def _effective_weights(weights, failed):
    w = np.where(failed, 0.0, weights)
    total = w.sum()
    if total > 0:
        return w / total
    ok = ~failed
    return ok / ok.sum()


# -- main loop ----------------------------------------------------------------


def run(
    load: HourlySeries,
    dt: HourlySeries | None,
    temp_forecast: HourlySeries,
    roster: Sequence[ExpertSpec],
    config: BacktestConfig,
) -> BacktestReport:
    config.validate()
    if not roster:
        raise ValidationError("roster is empty")
    series = [load, temp_forecast] + ([dt] if dt is not None else [])
    _, _, aligned = align(series)
    load, temp_forecast = aligned[0], aligned[1]
    dt = aligned[2] if dt is not None else None
    off = config.offset_hours

    first_test = split_day(load, config.train_fraction, off)
    last_day = int(day_number(load.end, off))
    n_rounds = last_day - first_test + 1

    specs = list(roster)
    names = [s.name for s in specs]
    kinds = sorted({s.feature_kind for s in specs}, key=lambda k: list(FeatureSetKind).index(k))
    matrices = _matrices(kinds, load, dt, temp_forecast, day_start(first_test, off), off)
    models = _fit_all(specs, matrices, jobs=config.jobs)

    acfg = replace(config.aggregator, n_experts=len(specs), expected_rounds=n_rounds)
    state = agg.initial_state(acfg)
    report = BacktestReport(names, config.retrain, [])

    for d in range(first_test, last_day + 1):
        day = day_to_date(d)
        actual = day_values(load, d, off)
        if np.any(np.isnan(actual)):
            report.skipped.append(SkippedDay(day, "missing actual load"))
            continue
        try:
            inputs = {
                k: forecast_inputs(d, k, load, dt, temp_forecast, off) for k in kinds
            }
        except ForecastError as exc:
            report.skipped.append(SkippedDay(day, f"no advice: {exc}"))
            continue
        advice = _advise(models, specs, inputs)
        failed = np.any(np.isnan(advice), axis=1)
        if failed.all():
            report.skipped.append(SkippedDay(day, "every expert failed"))
            continue
        used = _effective_weights(state.weights, failed)
        forecast = agg.combine(used[~failed], advice[~failed])
        try:
            f_mape = agg.mape(actual, forecast)
            e_mape = np.array([np.nan if f else agg.mape(actual, a) for a, f in zip(advice, failed)])
        except ZeroActual as exc:
            report.skipped.append(SkippedDay(day, str(exc)))
            continue
        scaled = np.where(failed, FAILED_LOSS, agg.scale_loss(np.nan_to_num(e_mape)))
        f_scaled = float(agg.scale_loss(f_mape))
        losses = agg.LossRecord(len(report.records) + 1, scaled, f_scaled, e_mape, f_mape)
        record = DayRecord(
            losses.round, day, actual, forecast, e_mape, f_mape, state.weights, advice, losses
        )
        state = agg.update(state, losses, acfg)
        report.records.append(record)
        report.forecaster_losses.append(f_scaled)
        report.regret.append(state.regret_history[-1])

        if config.retrain is Retrain.DAILY and d < last_day:
            matrices = _matrices(kinds, load, dt, temp_forecast, day_start(d + 1, off), off)
            models = _fit_all(specs, matrices, previous=models, jobs=config.jobs)

    for s in report.skipped:
        logger.info("skipped %s: %s", s.day, s.reason)
    return report


# -- summaries ----------------------------------------------------------------


def moving_average(values, window_days: int, days=None) -> np.ndarray:
    """Trailing mean over the last ``window_days`` calendar days.

    ``days`` gives the day numbers (or dates) of ``values``; consecutive days
    are assumed when omitted.  NaN entries count as gaps and are left out.
    """
    if window_days < 1:
        raise ValidationError("window_days must be >= 1")
    v = np.asarray(values, dtype=np.float64)
    if days is None:
        d = np.arange(v.size)
    else:
        d = np.array([date_to_day(x) if isinstance(x, date) else int(x) for x in days])
    out = np.full(v.size, np.nan)
    ok = ~np.isnan(v)
    for i in range(v.size):
        sel = ok & (d > d[i] - window_days) & (d <= d[i])
        if sel.any():
            out[i] = v[sel].mean()
    return out


def summarize(
    report: BacktestReport, start: date | None = None, end: date | None = None
) -> Summary:
    """Per-expert and forecaster MAPE over scored days in ``[start, end]``."""
    if start is not None and end is not None and start > end:
        raise EmptyRange(f"range {start}..{end} is reversed")
    recs = [
        r
        for r in report.records
        if (start is None or r.day >= start) and (end is None or r.day <= end)
    ]
    if not recs:
        raise EmptyRange("no scored days in range")
    E = np.vstack([r.expert_mape for r in recs])
    ok = ~np.isnan(E)
    counts = ok.sum(axis=0)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, np.nansum(E, axis=0) / np.maximum(counts, 1), np.nan)
    f = float(np.mean([r.forecaster_mape for r in recs]))
    return Summary(
        report.retrain,
        (*report.expert_names, FORECASTER),
        (*(float(m) for m in means), f),
        (*(int(c) for c in counts), len(recs)),
        recs[0].day,
        recs[-1].day,
    )


def peak_flags(report: BacktestReport, threshold_kw: float | None) -> list[tuple[date, int]]:
    """(day, hour) pairs where the combined forecast exceeds the threshold."""
    if threshold_kw is None:
        return []
    return [
        (r.day, h)
        for r in report.records
        for h in np.flatnonzero(r.forecast > threshold_kw).tolist()
    ]


# -- report files -------------------------------------------------------------

HOUR_COLS = [f"h{h:02d}" for h in range(HOURS_PER_DAY)]


def _writer(path: Path):
    fh = path.open("w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _num(x) -> str:
    return repr(float(x))


def write_summary(summary: Summary, path: str | Path) -> None:
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(["retrain", "expert", "mape", "n_days", "first_day", "last_day"])
        for n, m, c in zip(summary.names, summary.mape, summary.n_days):
            w.writerow(
                [summary.retrain.value, n, _num(m), c, summary.first.isoformat(), summary.last.isoformat()]
            )


def write_family_table(summary: Summary, path: str | Path) -> None:
    table = summary.family_table()
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(["retrain", *table])
        w.writerow([summary.retrain.value, *(_num(v) for v in table.values())])


def write_daily(report: BacktestReport, path: str | Path) -> None:
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(
            ["round", "date"]
            + [f"actual_{c}" for c in HOUR_COLS]
            + [f"forecast_{c}" for c in HOUR_COLS]
            + [f"mape_{n}" for n in report.expert_names]
            + [f"mape_{FORECASTER}"]
        )
        for r in report.records:
            w.writerow(
                [r.round, r.day.isoformat()]
                + [_num(x) for x in r.actual]
                + [_num(x) for x in r.forecast]
                + [_num(x) for x in r.expert_mape]
                + [_num(r.forecaster_mape)]
            )


def write_moving_average(report: BacktestReport, window_days: int, path: str | Path) -> None:
    days = report.days
    cols = [*report.expert_names, FORECASTER]
    series = np.column_stack(
        [np.vstack([r.expert_mape for r in report.records]), [r.forecaster_mape for r in report.records]]
    )
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(["date", *cols])
        smoothed = [moving_average(series[:, j], window_days, days) for j in range(len(cols))]
        for i, d in enumerate(days):
            w.writerow([d.isoformat(), *(_num(s[i]) for s in smoothed)])


def write_forecast_hours(report: BacktestReport, path: str | Path, offset_hours: int = 0) -> None:
    """Long format ``date,hour,actual,forecast`` for load-versus-forecast plots."""
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(["date", "hour", "actual", "forecast"])
        for r in report.records:
            for h in range(HOURS_PER_DAY):
                w.writerow([r.day.isoformat(), h, _num(r.actual[h]), _num(r.forecast[h])])


def write_report(report: BacktestReport, config: BacktestConfig, out_dir: str | Path) -> Summary:
    """Write the report CSVs and return the whole-range summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(report)
    write_summary(summary, out / "summary.csv")
    write_family_table(summary, out / "summary_table.csv")
    if config.summary_range is not None:
        sub = summarize(report, *config.summary_range)
        write_summary(sub, out / "summary_range.csv")
    write_daily(report, out / "daily.csv")
    agg.write_weight_trajectory(
        out / "weights.csv",
        (
            (r.round, n, r.weights[i], r.losses.expert_raw[i], r.losses.expert[i])
            for r in report.records
            for i, n in enumerate(report.expert_names)
        ),
    )
    agg.write_regret_trajectory(
        out / "regret.csv",
        ((r.round, l, g) for r, l, g in zip(report.records, report.forecaster_losses, report.regret)),
    )
    fh, w = _writer(out / "flags.csv")
    with fh:
        w.writerow(["date", "hour", "forecast"])
        by_day = {r.day: r for r in report.records}
        for d, h in peak_flags(report, config.peak_threshold_kw):
            w.writerow([d.isoformat(), h, _num(by_day[d].forecast[h])])
    fh, w = _writer(out / "skipped.csv")
    with fh:
        w.writerow(["date", "reason"])
        for s in report.skipped:
            w.writerow([s.day.isoformat(), s.reason])
    write_moving_average(report, config.moving_average_window_days, out / "moving_average.csv")
    return summary


def read_report(run_dir: str | Path, retrain: Retrain | str | None = None) -> BacktestReport:
    """Rebuild the scored-day records from ``daily.csv`` (and ``summary.csv``
    for the retrain label).  Advice, weights and losses are not restored."""
    run_dir = Path(run_dir)
    if retrain is None:
        with (run_dir / "summary.csv").open(newline="") as fh:
            retrain = next(csv.DictReader(fh))["retrain"]
    with (run_dir / "daily.csv").open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    names = [c[len("mape_") :] for c in header if c.startswith("mape_")][:-1]
    n = len(names)
    records = []
    for row in body:
        vals = np.array([float(x) for x in row[2:]])
        records.append(
            DayRecord(
                int(row[0]),
                date.fromisoformat(row[1]),
                vals[:HOURS_PER_DAY],
                vals[HOURS_PER_DAY : 2 * HOURS_PER_DAY],
                vals[2 * HOURS_PER_DAY : 2 * HOURS_PER_DAY + n],
                float(vals[-1]),
            )
        )
    skipped = []
    if (run_dir / "skipped.csv").exists():
        with (run_dir / "skipped.csv").open(newline="") as fh:
            skipped = [SkippedDay(date.fromisoformat(r["date"]), r["reason"]) for r in csv.DictReader(fh)]
    return BacktestReport(names, Retrain(retrain), records, skipped)
