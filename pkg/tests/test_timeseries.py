from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest

from dhforecast.errors import DuplicateTimestamp, EmptyIntersection, TooShort, ValidationError
from dhforecast.timeseries import (
    DailyBlock,
    HourlySeries,
    align,
    daily_blocks,
    date_to_day,
    day_start,
    day_to_date,
    format_hour,
    from_records,
    gap_hours,
    incomplete_days,
    parse_timestamp,
    read_csv,
    split_train_test,
    to_hour,
    write_csv,
)

from conftest import hourly


class TestHourIndex:
    def test_epoch_is_zero(self):
        assert to_hour(datetime(1970, 1, 1, tzinfo=timezone.utc)) == 0

    def test_round_trip_text(self):
        for h in (0, 1, 400_000, 420_123):
            assert to_hour(parse_timestamp(format_hour(h))) == h

    def test_offsets_are_honoured(self):
        a = parse_timestamp("2015-01-01T01:00:00+01:00")
        b = parse_timestamp("2015-01-01T00:00:00Z")
        assert to_hour(a) == to_hour(b)

    def test_naive_timestamp_rejected(self):
        with pytest.raises(ValidationError):
            parse_timestamp("2015-01-01T00:00:00")

    def test_day_conversions(self):
        d = date(2016, 2, 29)
        assert day_to_date(date_to_day(d)) == d
        assert day_start(d) == date_to_day(d) * 24
        # local midnight one hour ahead of UTC starts an hour earlier
        assert day_start(d, offset_hours=1) == date_to_day(d) * 24 - 1


class TestHourlySeries:
    def test_rejects_unsorted(self):
        with pytest.raises(ValidationError):
            HourlySeries("x", [2, 1], [0.0, 1.0])

    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            HourlySeries("x", [1, 2], [0.0, np.nan])

    def test_lookup_missing_is_nan(self):
        s = HourlySeries("x", [10, 11, 13], [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(s.lookup([9, 10, 12, 13, 99]), [np.nan, 1, np.nan, 3, np.nan])

    def test_between_is_half_open(self):
        s = hourly("x", 0, np.arange(10))
        part = s.between(2, 5)
        np.testing.assert_array_equal(part.hours, [2, 3, 4])

    def test_gap_hours(self):
        s = HourlySeries("x", [0, 1, 4], [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(gap_hours(s), [2, 3])


class TestAlign:
    def test_intersection(self):
        a = hourly("a", 0, np.arange(10))
        b = hourly("b", 5, np.arange(10))
        start, end, (a2, b2) = align([a, b])
        assert (start, end) == (5, 9)
        np.testing.assert_array_equal(a2.hours, b2.hours)
        np.testing.assert_array_equal(a2.values, [5, 6, 7, 8, 9])

    def test_interior_gap_dropped_everywhere(self):
        a = HourlySeries("a", [0, 1, 2, 3], [0.0, 1, 2, 3])
        b = HourlySeries("b", [0, 1, 3], [0.0, 1, 3])
        _, _, (a2, _) = align([a, b])
        np.testing.assert_array_equal(a2.hours, [0, 1, 3])

    def test_disjoint(self):
        with pytest.raises(EmptyIntersection):
            align([hourly("a", 0, [1.0]), hourly("b", 5, [1.0])])


class TestSplit:
    def test_fraction_of_days(self):
        s = hourly("x", 0, np.ones(24 * 100))
        train, test = split_train_test(s, 0.75)
        assert len(train) == 75 * 24
        assert len(test) == 25 * 24
        assert train.end + 1 == test.start

    def test_needs_two_days(self):
        with pytest.raises(TooShort):
            split_train_test(hourly("x", 0, np.ones(24)), 0.5)

    def test_bad_fraction(self):
        with pytest.raises(ValidationError):
            split_train_test(hourly("x", 0, np.ones(48)), 1.0)


class TestDailyBlocks:
    def test_partial_day_skipped(self):
        s = hourly("x", 0, np.arange(72.0))
        s = s.restrict(np.setdiff1d(s.hours, [30]))
        blocks = daily_blocks(s)
        assert [b.day_index for b in blocks] == [1, 3]
        np.testing.assert_array_equal(blocks[1].values, np.arange(48.0, 72.0))
        assert incomplete_days(s) == [date(1970, 1, 2)]

    def test_block_needs_24(self):
        with pytest.raises(ValidationError):
            DailyBlock(1, date(2015, 1, 1), np.ones(23))


class TestCsv:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        s = hourly("load", 400_000, rng.normal(1000, 300, 50))
        write_csv(s, tmp_path / "load.csv")
        back = read_csv(tmp_path / "load.csv")
        assert back.equals(s)

    def test_quarter_hours_averaged(self, tmp_path):
        p = tmp_path / "q.csv"
        p.write_text(
            "timestamp,value\n"
            "2015-01-01T00:00:00Z,1\n2015-01-01T00:15:00Z,2\n"
            "2015-01-01T00:30:00Z,3\n2015-01-01T00:45:00Z,4\n"
            "2015-01-01T01:00:00Z,10\n"
        )
        s = read_csv(p)
        np.testing.assert_allclose(s.values, [2.5, 10.0])

    def test_duplicate_rejected(self):
        t = datetime(2015, 1, 1, tzinfo=timezone.utc)
        with pytest.raises(DuplicateTimestamp):
            from_records("x", [t, t + timedelta(hours=1), t], [1.0, 2.0, 3.0])

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,val\n")
        with pytest.raises(ValidationError):
            read_csv(p)
