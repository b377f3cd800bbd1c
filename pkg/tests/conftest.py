import numpy as np
import pytest

from dhforecast.datagen import DtProfile, GeneratorConfig, generate
from dhforecast.timeseries import HourlySeries, date_to_day, day_start


def hourly(name, start_hour, values):
    values = np.asarray(values, dtype=float)
    return HourlySeries(name, start_hour + np.arange(values.size), values)


@pytest.fixture(scope="session")
def small_data():
    """Four months of synthetic data with control events and a short outage."""
    cfg = GeneratorConfig(
        seed=11, months=4, dt_profile=DtProfile(), outages=[("2015-03-10", "2015-03-11")]
    )
    return generate(cfg)


@pytest.fixture
def day0():
    return date_to_day(np.datetime64("2015-01-05", "D").astype(object))


@pytest.fixture
def h0(day0):
    return day_start(day0)
