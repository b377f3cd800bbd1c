"""Synthetic district-heating data: load, control signal and temperature forecast.

Temperature is a seasonal sinusoid plus a diurnal sinusoid plus a daily AR(1)
anomaly (interpolated to hours).  Load is a heating-curve response::

    load = base + sensitivity * max(0, threshold - (T + dT))
           + weekday morning bump + hour-of-day profile + noise

clamped at zero.  The control signal dT is zero unless a demand-response
schedule is configured.
"""

from __future__ import annotations

import calendar
import math
from dataclasses import asdict, dataclass, field
from datetime import date
from typing import Any

import numpy as np

from .errors import ValidationError, ZeroVariance
from .timeseries import (
    HOURS_PER_DAY,
    HourlySeries,
    date_to_day,
    day_number,
    day_start,
    hour_of_day,
)

# Additive hour-of-day load shape (kW per unit of hod_amplitude_kw): low at
# night, a morning rise and a smaller evening shoulder.
HOD_SHAPE = np.array(
    [-0.8, -0.9, -1.0, -1.0, -0.9, -0.6, 0.2, 0.9, 1.0, 0.8, 0.5, 0.3,
     0.2, 0.1, 0.1, 0.2, 0.3, 0.5, 0.6, 0.5, 0.2, -0.1, -0.4, -0.6]
)
MORNING_HOURS = (6, 7, 8, 9)


@dataclass
class DtProfile:
    """Random demand-response events: on a fraction of days the controller
    reports a temperature ``magnitude_degC`` warmer during ``hours``."""

    hours: list[int] = field(default_factory=lambda: [6, 7, 8, 9])
    magnitude_degC: float = 3.0
    probability: float = 0.25
    weekdays_only: bool = True


@dataclass
class GeneratorConfig:
    seed: int = 0
    months: int = 27
    start: str = "2014-12-01"
    offset_hours: int = 0
    base_load_kw: float = 500.0
    temp_sensitivity_kw_per_degC: float = 90.0
    temp_threshold_degC: float = 15.0
    weekday_morning_peak_kw: float = 300.0
    hod_amplitude_kw: float = 200.0
    noise_std_kw: float = 70.0
    temp_mean_degC: float = 9.0
    temp_seasonal_amplitude_degC: float = 11.0
    temp_diurnal_amplitude_degC: float = 3.0
    temp_anomaly_std_degC: float = 3.0
    temp_ar_coef: float = 0.9
    dt_profile: DtProfile | None = None
    outages: list[tuple[str, str]] = field(default_factory=list)

    def validate(self) -> None:
        if self.months < 2:
            raise ValidationError(f"months must be >= 2, got {self.months}")
        for name in (
            "base_load_kw",
            "temp_sensitivity_kw_per_degC",
            "weekday_morning_peak_kw",
            "hod_amplitude_kw",
            "noise_std_kw",
            "temp_seasonal_amplitude_degC",
            "temp_diurnal_amplitude_degC",
            "temp_anomaly_std_degC",
        ):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if not 0.0 <= self.temp_ar_coef < 1.0:
            raise ValidationError("temp_ar_coef must lie in [0, 1)")
        if self.dt_profile is not None:
            p = self.dt_profile
            if not 0.0 <= p.probability <= 1.0:
                raise ValidationError("dt_profile.probability must lie in [0, 1]")
            if any(not 0 <= h < 24 for h in p.hours):
                raise ValidationError("dt_profile.hours must be within 0..23")
        date.fromisoformat(self.start)
        for a, b in self.outages:
            if date.fromisoformat(a) > date.fromisoformat(b):
                raise ValidationError(f"outage {a}..{b} is reversed")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["outages"] = [list(o) for o in self.outages]
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GeneratorConfig:
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown generator fields: {sorted(unknown)}")
        if data.get("dt_profile") is not None:
            data["dt_profile"] = DtProfile(**data["dt_profile"])
        if "outages" in data:
            data["outages"] = [tuple(o) for o in data["outages"]]
        cfg = cls(**data)
        cfg.validate()
        return cfg


def _add_months(d: date, months: int) -> date:
    y, m = divmod(d.month - 1 + months, 12)
    year, month = d.year + y, m + 1
    return date(year, month, min(d.day, calendar.monthrange(year, month)[1]))


def generate(config: GeneratorConfig) -> tuple[HourlySeries, HourlySeries, HourlySeries]:
    """Return ``(load, dt, temp_forecast)`` hourly series."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    first = date.fromisoformat(config.start)
    last = _add_months(first, config.months)
    d0, d1 = date_to_day(first), date_to_day(last)
    n_days = d1 - d0
    off = config.offset_hours
    hours = np.arange(day_start(d0, off), day_start(d1, off), dtype=np.int64)
    days = day_number(hours, off)
    hod = hour_of_day(hours, off)
    dow = np.mod(days + 3, 7)

    # seasonal minimum around 15 January, diurnal maximum at 15:00
    t_days = (hours + off) / HOURS_PER_DAY
    jan15 = date_to_day(date(2000, 1, 15))
    seasonal = -np.cos(2 * np.pi * (t_days - jan15) / 365.25)
    diurnal = np.cos(2 * np.pi * (hod - 15) / 24.0)
    phi = config.temp_ar_coef
    shocks = rng.normal(0.0, config.temp_anomaly_std_degC * math.sqrt(1 - phi * phi), n_days + 1)
    anomaly = np.empty(n_days + 1)
    anomaly[0] = rng.normal(0.0, config.temp_anomaly_std_degC)
    for k in range(1, n_days + 1):
        anomaly[k] = phi * anomaly[k - 1] + shocks[k]
    anomaly_h = np.interp(t_days - d0, np.arange(n_days + 1), anomaly)
    temp = (
        config.temp_mean_degC
        + config.temp_seasonal_amplitude_degC * seasonal
        + config.temp_diurnal_amplitude_degC * diurnal
        + anomaly_h
    )

    dt = np.zeros(hours.size)
    if config.dt_profile is not None:
        p = config.dt_profile
        event_day = rng.random(n_days) < p.probability
        active = event_day[days - d0] & np.isin(hod, p.hours)
        if p.weekdays_only:
            active &= dow < 5
        dt[active] = p.magnitude_degC

    weekday_morning = (dow < 5) & np.isin(hod, MORNING_HOURS)
    load = (
        config.base_load_kw
        + config.temp_sensitivity_kw_per_degC
        * np.maximum(0.0, config.temp_threshold_degC - (temp + dt))
        + config.weekday_morning_peak_kw * weekday_morning
        + config.hod_amplitude_kw * HOD_SHAPE[hod]
        + rng.normal(0.0, config.noise_std_kw, hours.size)
    )
    load = np.maximum(load, 0.0)

    keep = np.ones(hours.size, bool)
    for a, b in config.outages:
        lo = day_start(date.fromisoformat(a), off)
        hi = day_start(date.fromisoformat(b), off) + HOURS_PER_DAY
        keep &= ~((hours >= lo) & (hours < hi))
    hours = hours[keep]
    return (
        HourlySeries("load", hours, load[keep]),
        HourlySeries("dt", hours, dt[keep]),
        HourlySeries("temp_forecast", hours, temp[keep]),
    )


def _values(x) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, HourlySeries) else x, dtype=np.float64)


def ppmcc(x, y) -> float:
    """Pearson product-moment correlation of two equal-length samples.

    Two :class:`HourlySeries` are first matched on their common hours.
    """
    if isinstance(x, HourlySeries) and isinstance(y, HourlySeries):
        common = np.intersect1d(x.hours, y.hours)
        x, y = x.lookup(common), y.lookup(common)
    a, b = _values(x), _values(y)
    if a.shape != b.shape or a.size < 2:
        raise ValidationError("ppmcc needs two samples of equal length >= 2")
    a = a - a.mean()
    b = b - b.mean()
    sa, sb = math.sqrt(a @ a), math.sqrt(b @ b)
    if sa == 0.0 or sb == 0.0:
        raise ZeroVariance("ppmcc undefined for a constant sample")
    return float(np.clip((a @ b) / (sa * sb), -1.0, 1.0))


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Lag-h Pearson correlation of a series with itself for h = 0..max_lag.

    For an :class:`HourlySeries` each lag pairs only hours present at both ends.
    """
    if isinstance(series, HourlySeries):
        n = len(series)
        if n <= max_lag:
            raise ValidationError("series shorter than max_lag + 1")
        if np.var(series.values) == 0:
            raise ZeroVariance("autocorrelation undefined for a constant series")
        out = [1.0]
        for h in range(1, max_lag + 1):
            prev = series.lookup(series.hours - h)
            ok = ~np.isnan(prev)
            out.append(ppmcc(series.values[ok], prev[ok]))
        return np.array(out)
    x = _values(series)
    if x.size <= max_lag:
        raise ValidationError("series shorter than max_lag + 1")
    if np.var(x) == 0:
        raise ZeroVariance("autocorrelation undefined for a constant series")
    return np.array([1.0] + [ppmcc(x[h:], x[:-h]) for h in range(1, max_lag + 1)])
