"""Hourly time-series model: alignment, gaps, day blocks and train/test splits.

Timestamps are plain integers counting whole hours since 1970-01-01T00:00Z.
Calendar days are taken in local time at a fixed UTC offset (no DST), so every
day has exactly 24 hours.  Missing hours are simply absent from a series.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateTimestamp, EmptyIntersection, TooShort, ValidationError

logger = logging.getLogger(__name__)

HOURS_PER_DAY = 24
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_EPOCH_ORDINAL = date(1970, 1, 1).toordinal()


def to_hour(ts: datetime) -> int:
    """Convert an aware datetime to the hour index, truncating minutes/seconds."""
    if ts.tzinfo is None:
        raise ValidationError(f"timestamp {ts!r} has no UTC offset")
    seconds = (ts - EPOCH).total_seconds()
    return int(math.floor(seconds / 3600.0))


def from_hour(hour: int) -> datetime:
    return EPOCH + timedelta(hours=int(hour))


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValidationError(f"timestamp {text!r} lacks an explicit offset")
    return ts


def format_hour(hour: int) -> str:
    return from_hour(hour).strftime("%Y-%m-%dT%H:%M:%S+00:00")


def day_number(hours, offset_hours: int = 0):
    """Local day count since 1970-01-01 for hour index(es)."""
    return np.floor_divide(np.asarray(hours, dtype=np.int64) + offset_hours, HOURS_PER_DAY)


def hour_of_day(hours, offset_hours: int = 0):
    return np.mod(np.asarray(hours, dtype=np.int64) + offset_hours, HOURS_PER_DAY)


def day_start(day: int | date, offset_hours: int = 0) -> int:
    """Hour index of local midnight opening ``day``."""
    if isinstance(day, date):
        day = date_to_day(day)
    return int(day) * HOURS_PER_DAY - offset_hours


def day_to_date(day: int) -> date:
    return date.fromordinal(_EPOCH_ORDINAL + int(day))


def date_to_day(d: date) -> int:
    return d.toordinal() - _EPOCH_ORDINAL


@dataclass(frozen=True, eq=False)
class HourlySeries:
    """Named hourly values keyed by hour index; strictly increasing, all finite."""

    name: str
    hours: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        hours = np.array(self.hours, dtype=np.int64).reshape(-1)
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if hours.shape != values.shape:
            raise ValidationError(
                f"{self.name}: {hours.size} timestamps but {values.size} values"
            )
        if hours.size > 1 and np.any(np.diff(hours) <= 0):
            raise ValidationError(f"{self.name}: timestamps must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"{self.name}: non-finite values")
        hours.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "hours", hours)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_pairs(cls, name: str, pairs: Iterable[tuple[int, float]]) -> HourlySeries:
        pairs = sorted(pairs)
        if not pairs:
            return cls(name, np.empty(0, np.int64), np.empty(0))
        h, v = zip(*pairs)
        return cls(name, np.array(h), np.array(v))

    def __len__(self) -> int:
        return int(self.hours.size)

    @property
    def start(self) -> int:
        return int(self.hours[0])

    @property
    def end(self) -> int:
        """Last hour present (inclusive)."""
        return int(self.hours[-1])

    def lookup(self, hours) -> np.ndarray:
        """Values at the requested hours, NaN where the series has no point."""
        hours = np.asarray(hours, dtype=np.int64)
        out = np.full(hours.shape, np.nan)
        if len(self) == 0:
            return out
        pos = np.searchsorted(self.hours, hours)
        pos_c = np.minimum(pos, len(self) - 1)
        hit = self.hours[pos_c] == hours
        out[hit] = self.values[pos_c[hit]]
        return out

    def between(self, start: int | None = None, stop: int | None = None) -> HourlySeries:
        """Points with ``start <= hour < stop`` (either bound optional)."""
        lo = 0 if start is None else np.searchsorted(self.hours, start, side="left")
        hi = len(self) if stop is None else np.searchsorted(self.hours, stop, side="left")
        return HourlySeries(self.name, self.hours[lo:hi], self.values[lo:hi])

    def restrict(self, keep: np.ndarray) -> HourlySeries:
        mask = np.isin(self.hours, keep)
        return HourlySeries(self.name, self.hours[mask], self.values[mask])

    def renamed(self, name: str) -> HourlySeries:
        return HourlySeries(name, self.hours, self.values)

    def equals(self, other: HourlySeries) -> bool:
        return (
            self.name == other.name
            and np.array_equal(self.hours, other.hours)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class DailyBlock:
    """Exactly 24 hourly values for one local calendar day."""

    day_index: int
    day: date
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size != HOURS_PER_DAY:
            raise ValidationError(f"daily block needs 24 values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("daily block has non-finite values")
        if self.day_index < 1:
            raise ValidationError("day_index must be >= 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def align(series_list: Sequence[HourlySeries]) -> tuple[int, int, list[HourlySeries]]:
    """Trim every series to the hours they all share.

    Returns the first and last common hour plus the trimmed series.  Hours
    inside the common span that any series lacks are dropped from all of them.
    """
    if not series_list:
        raise ValidationError("align needs at least one series")
    common = series_list[0].hours
    for s in series_list[1:]:
        common = np.intersect1d(common, s.hours, assume_unique=True)
    if common.size == 0:
        raise EmptyIntersection("series share no common hour")
    start, end = int(common[0]), int(common[-1])
    n_gaps = (end - start + 1) - common.size
    if n_gaps:
        logger.info("align: %d hours missing in at least one series", n_gaps)
    return start, end, [s.restrict(common) for s in series_list]


def gap_hours(series: HourlySeries) -> np.ndarray:
    """Hours between the series' first and last point that have no value."""
    if len(series) == 0:
        return np.empty(0, np.int64)
    full = np.arange(series.start, series.end + 1, dtype=np.int64)
    return np.setdiff1d(full, series.hours, assume_unique=True)


def split_train_test(
    series: HourlySeries, train_fraction: float, offset_hours: int = 0
) -> tuple[HourlySeries, HourlySeries]:
    """Chronological split at a local midnight.

    The series' calendar days (first through last) are counted and the first
    ``floor(train_fraction * n_days)`` of them become the training part.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError("train_fraction must lie in (0, 1)")
    if len(series) == 0:
        raise TooShort("empty series")
    days = day_number(series.hours, offset_hours)
    first, last = int(days[0]), int(days[-1])
    n_days = last - first + 1
    if n_days < 2:
        raise TooShort(f"{series.name}: need at least 2 days, have {n_days}")
    n_train = min(max(int(math.floor(train_fraction * n_days)), 1), n_days - 1)
    cut = day_start(first + n_train, offset_hours)
    return series.between(None, cut), series.between(cut, None)


def split_day(series: HourlySeries, train_fraction: float, offset_hours: int = 0) -> int:
    """Local day number that opens the test part of :func:`split_train_test`."""
    _, test = split_train_test(series, train_fraction, offset_hours)
    if len(test) == 0:
        raise TooShort("test part is empty")
    return int(day_number(test.start, offset_hours))


def _complete_days(series: HourlySeries, offset_hours: int):
    days = day_number(series.hours, offset_hours)
    uniq, counts = np.unique(days, return_counts=True)
    return days, uniq, counts


def daily_blocks(series: HourlySeries, offset_hours: int = 0) -> list[DailyBlock]:
    """One block per local day with all 24 hours present; partial days are logged and skipped."""
    if len(series) == 0:
        return []
    days, uniq, counts = _complete_days(series, offset_hours)
    first = int(uniq[0])
    blocks = []
    for d, c in zip(uniq, counts):
        if c != HOURS_PER_DAY:
            logger.info("daily_blocks: %s has %d/24 hours, skipped", day_to_date(d), c)
            continue
        vals = series.values[days == d]
        blocks.append(DailyBlock(int(d) - first + 1, day_to_date(d), vals))
    return blocks


def incomplete_days(series: HourlySeries, offset_hours: int = 0) -> list[date]:
    """Local days inside the series' span lacking at least one hour."""
    if len(series) == 0:
        return []
    days, uniq, counts = _complete_days(series, offset_hours)
    present = dict(zip(uniq.tolist(), counts.tolist()))
    return [
        day_to_date(d)
        for d in range(int(uniq[0]), int(uniq[-1]) + 1)
        if present.get(d, 0) != HOURS_PER_DAY
    ]


def day_values(series: HourlySeries, day: int, offset_hours: int = 0) -> np.ndarray:
    """24 values of local day ``day`` (NaN for missing hours)."""
    start = day_start(day, offset_hours)
    return series.lookup(np.arange(start, start + HOURS_PER_DAY))


# -- CSV ingestion -----------------------------------------------------------


def read_csv(path: str | Path, name: str | None = None) -> HourlySeries:
    """Load a ``timestamp,value`` CSV.

    Rows may come in any order.  Sub-hourly rows (e.g. quarter-hourly meter
    data) are averaged into the hour they fall in.  Repeated timestamps are an
    error.
    """
    path = Path(path)
    stamps: list[datetime] = []
    values: list[float] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "value"]:
            raise ValidationError(f"{path}: expected header 'timestamp,value', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}:{lineno}: expected 2 fields")
            try:
                stamps.append(parse_timestamp(row[0]))
                values.append(float(row[1]))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return from_records(name or path.stem, stamps, values)


def from_records(name: str, stamps: Sequence[datetime], values: Sequence[float]) -> HourlySeries:
    """Build a series from (possibly sub-hourly, unordered) timestamped values."""
    if not stamps:
        return HourlySeries(name, np.empty(0, np.int64), np.empty(0))
    seconds = np.array([(ts - EPOCH).total_seconds() for ts in stamps])
    vals = np.asarray(values, dtype=np.float64)
    order = np.argsort(seconds, kind="stable")
    seconds, vals = seconds[order], vals[order]
    if np.any(np.diff(seconds) == 0):
        dup = seconds[1:][np.diff(seconds) == 0][0]
        raise DuplicateTimestamp(f"{name}: duplicate timestamp {EPOCH + timedelta(seconds=dup)}")
    hours = np.floor(seconds / 3600.0).astype(np.int64)
    uniq, inverse, counts = np.unique(hours, return_inverse=True, return_counts=True)
    if uniq.size == hours.size:
        return HourlySeries(name, uniq, vals)
    sums = np.bincount(inverse, weights=vals)
    return HourlySeries(name, uniq, sums / counts)


def write_csv(series: HourlySeries, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("timestamp,value\n")
        for h, v in zip(series.hours.tolist(), series.values.tolist()):
            fh.write(f"{format_hour(h)},{v!r}\n")
