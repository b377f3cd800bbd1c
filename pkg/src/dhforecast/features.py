"""Feature sets built from load, control-signal and temperature-forecast series.

Three input configurations are supported:

========== ======================================================
kind        columns
========== ======================================================
FULL        hod, dow, doy, t_out_forecast, p_lag24, p_lag168,
            dt_lag24, dt_lag168
MINUS_DT    as FULL without the two control-signal lags
MINUS_LAGS  hod, dow, doy, t_out_forecast
========== ======================================================

Calendar values are plain integers in local time: hour 0-23, weekday with
Monday = 0, day of year 1-366.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .errors import InsufficientHistory, MissingForecast, ValidationError
from .timeseries import (
    HOURS_PER_DAY,
    HourlySeries,
    date_to_day,
    day_number,
    day_start,
    format_hour,
    hour_of_day,
    parse_timestamp,
    to_hour,
)

LAG_DAY = 24
LAG_WEEK = 168

ALL_COLUMNS = (
    "hod",
    "dow",
    "doy",
    "t_out_forecast",
    "p_lag24",
    "p_lag168",
    "dt_lag24",
    "dt_lag168",
)


class FeatureSetKind(str, enum.Enum):
    FULL = "full"
    MINUS_DT = "set-dt"
    MINUS_LAGS = "set-lags"

    @property
    def columns(self) -> tuple[str, ...]:
        return ALL_COLUMNS[: {"full": 8, "set-dt": 6, "set-lags": 4}[self.value]]

    @property
    def n_features(self) -> int:
        return len(self.columns)

    @property
    def uses_load_lags(self) -> bool:
        return self is not FeatureSetKind.MINUS_LAGS

    @property
    def uses_dt_lags(self) -> bool:
        return self is FeatureSetKind.FULL


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows of features (one per hour) with optional aligned load targets."""

    kind: FeatureSetKind
    hours: np.ndarray
    X: np.ndarray
    targets: np.ndarray | None = None

    def __post_init__(self):
        hours = np.asarray(self.hours, dtype=np.int64).reshape(-1)
        X = np.asarray(self.X, dtype=np.float64).reshape(hours.size, -1)
        if X.shape[1] != self.kind.n_features:
            raise ValidationError(
                f"{self.kind.value} expects {self.kind.n_features} columns, got {X.shape[1]}"
            )
        if not np.all(np.isfinite(X)):
            raise ValidationError("feature matrix has non-finite values")
        object.__setattr__(self, "hours", hours)
        object.__setattr__(self, "X", X)
        if self.targets is not None:
            y = np.asarray(self.targets, dtype=np.float64).reshape(-1)
            if y.size != hours.size:
                raise ValidationError("targets and rows differ in length")
            object.__setattr__(self, "targets", y)

    @property
    def columns(self) -> tuple[str, ...]:
        return self.kind.columns

    def __len__(self) -> int:
        return int(self.hours.size)

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.columns.index(name)]

    def take(self, index) -> FeatureMatrix:
        y = None if self.targets is None else self.targets[index]
        return FeatureMatrix(self.kind, self.hours[index], self.X[index], y)

    def before(self, stop_hour: int) -> FeatureMatrix:
        return self.take(self.hours < stop_hour)

    def project(self, kind: FeatureSetKind) -> FeatureMatrix:
        """Drop trailing columns to obtain a smaller feature set on the same rows."""
        if kind.n_features > self.kind.n_features:
            raise ValidationError(f"cannot project {self.kind.value} onto {kind.value}")
        return FeatureMatrix(kind, self.hours, self.X[:, : kind.n_features], self.targets)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            header = ["timestamp", *self.columns]
            if self.targets is not None:
                header.append("target")
            fh.write(",".join(header) + "\n")
            for i, h in enumerate(self.hours.tolist()):
                row = [format_hour(h)] + [repr(v) for v in self.X[i].tolist()]
                if self.targets is not None:
                    row.append(repr(float(self.targets[i])))
                fh.write(",".join(row) + "\n")

    @classmethod
    def read_csv(cls, path: str | Path) -> FeatureMatrix:
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], [r for r in rows[1:] if r]
        has_target = header[-1] == "target"
        names = tuple(header[1 : len(header) - has_target])
        kind = next((k for k in FeatureSetKind if k.columns == names), None)
        if kind is None:
            raise ValidationError(f"unknown feature columns {names}")
        hours = np.array([to_hour(parse_timestamp(r[0])) for r in body], dtype=np.int64)
        data = np.array([[float(x) for x in r[1:]] for r in body]).reshape(len(body), -1)
        X = data[:, : kind.n_features]
        y = data[:, -1] if has_target else None
        return cls(kind, hours, X, y)


def calendar_features(hours, offset_hours: int = 0):
    """(hour of day, weekday with Monday=0, day of year) in local time.

    Accepts a scalar hour index or an array of them.
    """
    scalar = np.ndim(hours) == 0
    days = day_number(hours, offset_hours)
    hod = hour_of_day(hours, offset_hours)
    dow = np.mod(days + 3, 7)  # 1970-01-01 was a Thursday
    d64 = days.astype("datetime64[D]")
    doy = (d64 - d64.astype("datetime64[Y]").astype("datetime64[D]")).astype(np.int64) + 1
    if scalar:
        return int(hod), int(dow), int(doy)
    return hod, dow, doy


def _feature_columns(hours, kind, load, dt, temp, offset_hours):
    hod, dow, doy = calendar_features(hours, offset_hours)
    cols = [hod.astype(float), dow.astype(float), doy.astype(float), temp.lookup(hours)]
    if kind.uses_load_lags:
        cols += [load.lookup(hours - LAG_DAY), load.lookup(hours - LAG_WEEK)]
    if kind.uses_dt_lags:
        cols += [dt.lookup(hours - LAG_DAY), dt.lookup(hours - LAG_WEEK)]
    return np.column_stack(cols)


def _check_history(kind, start, load, dt):
    if not kind.uses_load_lags:
        return
    needed = start - LAG_WEEK
    if len(load) == 0 or load.start > needed:
        raise InsufficientHistory(
            f"{kind.value}: load history must reach {LAG_WEEK} h before the first row"
        )
    if kind.uses_dt_lags and (dt is None or len(dt) == 0 or dt.start > needed):
        raise InsufficientHistory(
            f"{kind.value}: control-signal history must reach {LAG_WEEK} h before the first row"
        )


def build_matrix(
    load: HourlySeries,
    dt: HourlySeries | None,
    temp_forecast: HourlySeries,
    kind: FeatureSetKind,
    start: int | None = None,
    stop: int | None = None,
    offset_hours: int = 0,
) -> FeatureMatrix:
    """Training rows for every hour in ``[start, stop)`` where all inputs exist.

    ``start`` defaults to the earliest hour with enough lag history for
    ``kind``; ``stop`` to one past the last load hour.  Rows whose lag sources
    fall in gaps are dropped.
    """
    if kind.uses_dt_lags and dt is None:
        raise ValidationError("FULL feature set requires the control-signal series")
    if start is None:
        start = load.start + (LAG_WEEK if kind.uses_load_lags else 0)
        if kind.uses_dt_lags:
            start = max(start, dt.start + LAG_WEEK)
    if stop is None:
        stop = load.end + 1
    _check_history(kind, start, load, dt)
    hours = load.between(start, stop).hours
    X = _feature_columns(hours, kind, load, dt, temp_forecast, offset_hours)
    ok = np.all(np.isfinite(X), axis=1)
    return FeatureMatrix(kind, hours[ok], X[ok], load.lookup(hours[ok]))


def forecast_inputs(
    day: int | date,
    kind: FeatureSetKind,
    load: HourlySeries,
    dt: HourlySeries | None,
    temp_forecast: HourlySeries,
    offset_hours: int = 0,
) -> FeatureMatrix:
    """The 24 input rows used to forecast local day ``day``.

    Load and control-signal histories are cut at the day's midnight before any
    lookup, so only the temperature forecast can carry same-day information.
    """
    if kind.uses_dt_lags and dt is None:
        raise ValidationError("FULL feature set requires the control-signal series")
    if isinstance(day, date):
        day = date_to_day(day)
    t0 = day_start(day, offset_hours)
    hours = np.arange(t0, t0 + HOURS_PER_DAY, dtype=np.int64)
    if np.any(np.isnan(temp_forecast.lookup(hours))):
        raise MissingForecast(f"temperature forecast incomplete for day {day}")
    past_load = load.between(None, t0)
    past_dt = dt.between(None, t0) if dt is not None else None
    X = _feature_columns(hours, kind, past_load, past_dt, temp_forecast, offset_hours)
    if not np.all(np.isfinite(X)):
        raise InsufficientHistory(f"{kind.value}: lag inputs missing for day {day}")
    return FeatureMatrix(kind, hours, X)
