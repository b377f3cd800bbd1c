from datetime import date, timedelta

import numpy as np
import pytest

from dhforecast import backtest as bt
from dhforecast.aggregation import AggregatorConfig, initial_state, update
from dhforecast.errors import EmptyRange, NonFinite, ValidationError
from dhforecast.experts import ExpertSpec, Family, NetParams, TreeParams
from dhforecast.features import FeatureSetKind
from dhforecast.timeseries import day_start


def fast_roster():
    return [
        ExpertSpec(Family.LINEAR, FeatureSetKind.FULL),
        ExpertSpec(Family.EXTRA_TREES, FeatureSetKind.MINUS_DT, TreeParams(n_trees=5), seed=1),
        ExpertSpec(Family.NEURAL_NET, FeatureSetKind.MINUS_LAGS, NetParams(epochs=3), seed=2),
    ]


@pytest.fixture(scope="module")
def report(small_data):
    return bt.run(*small_data, fast_roster(), bt.BacktestConfig())


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"train_fraction": 1.0},
            {"moving_average_window_days": 0},
            {"peak_threshold_kw": 0.0},
            {"jobs": 0},
            {"summary_range": (date(2015, 2, 1), date(2015, 1, 1))},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            bt.BacktestConfig(**kw).validate()

    def test_retrain_from_string(self):
        assert bt.BacktestConfig(retrain="daily").retrain is bt.Retrain.DAILY


class TestRun:
    def test_uniform_start(self, report):
        np.testing.assert_array_equal(report.records[0].weights, np.full(3, 1 / 3))

    def test_rounds_cover_test_period(self, report, small_data):
        days = report.days + [s.day for s in report.skipped]
        assert len(days) == len(set(days))
        first, last = min(days), max(days)
        assert (last - first).days + 1 == len(days)
        assert last == date(2015, 3, 31)

    def test_outage_skipped_with_reasons(self, report):
        reasons = {s.day: s.reason for s in report.skipped}
        for d in (date(2015, 3, 10), date(2015, 3, 11)):
            assert reasons[d] == "missing actual load"
        # lag-24 inputs are missing the day after, lag-168 inputs a week later
        outage_days = {date(2015, 3, d) for d in (10, 11, 12, 17, 18)}
        assert set(reasons) == outage_days
        for d in (date(2015, 3, 12), date(2015, 3, 17), date(2015, 3, 18)):
            assert reasons[d].startswith("no advice")

    def test_weights_frozen_over_skipped_days(self, report):
        recs = {r.day: r for r in report.records}
        before, after = recs[date(2015, 3, 9)], recs[date(2015, 3, 13)]
        assert after.round == before.round + 1
        # the day after the gap uses the weights produced by the last scored day
        cfg = AggregatorConfig(n_experts=3, expected_rounds=len(report.records) + len(report.skipped))
        state = initial_state(cfg)
        for r in report.records[: before.round]:
            state = update(state, r.losses, cfg)
        np.testing.assert_allclose(after.weights, state.weights, rtol=1e-12)

    def test_forecast_is_weighted_advice(self, report):
        for r in report.records[:5]:
            np.testing.assert_allclose(r.forecast, r.weights @ r.advice, rtol=1e-12)

    def test_ledger_consistency(self, report):
        assert report.regret[-1] == pytest.approx(
            sum(report.forecaster_losses) - np.min(np.sum([r.losses.expert for r in report.records], axis=0))
        )
        np.testing.assert_allclose(
            [r.losses.forecaster for r in report.records], report.forecaster_losses
        )

    def test_identical_experts(self, small_data):
        spec = ExpertSpec(Family.LINEAR, FeatureSetKind.MINUS_DT)
        rep = bt.run(*small_data, [spec, spec], bt.BacktestConfig())
        for r in rep.records:
            assert r.forecaster_mape == pytest.approx(r.expert_mape[0], rel=1e-12)
        np.testing.assert_allclose(rep.regret, 0.0, atol=1e-12)

    def test_eta_zero_is_plain_average(self, small_data):
        cfg = bt.BacktestConfig(aggregator=AggregatorConfig(rule="ewa", eta=0.0))
        rep = bt.run(*small_data, fast_roster(), cfg)
        for r in rep.records:
            np.testing.assert_allclose(r.forecast, r.advice.mean(axis=0), rtol=1e-12)

    def test_deterministic(self, small_data, report, tmp_path):
        again = bt.run(*small_data, fast_roster(), bt.BacktestConfig())
        bt.write_report(report, bt.BacktestConfig(), tmp_path / "a")
        bt.write_report(again, bt.BacktestConfig(), tmp_path / "b")
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_expert_failure_charged_worst_loss(self, small_data, monkeypatch):
        real = bt.predict
        bad_day = date(2015, 3, 25)

        def flaky(model, inputs):
            if model.spec.family is Family.EXTRA_TREES and inputs.hours[0] == day_start(bad_day):
                raise NonFinite("boom")
            return real(model, inputs)

        monkeypatch.setattr(bt, "predict", flaky)
        rep = bt.run(*small_data, fast_roster(), bt.BacktestConfig())
        rec = next(r for r in rep.records if r.day == bad_day)
        assert np.isnan(rec.expert_mape[1])
        assert rec.losses.expert[1] == 1.0
        w = rec.weights[[0, 2]] / rec.weights[[0, 2]].sum()
        np.testing.assert_allclose(rec.forecast, w @ rec.advice[[0, 2]], rtol=1e-12)
        # summaries average only the days the expert produced advice
        s = bt.summarize(rep)
        assert s.n_days[1] == s.n_days[-1] - 1

    def test_daily_retrain_changes_models(self, small_data):
        roster = [ExpertSpec(Family.LINEAR, FeatureSetKind.MINUS_DT)]
        cfg = bt.BacktestConfig(train_fraction=0.9, retrain="daily")
        daily = bt.run(*small_data, roster, cfg)
        static = bt.run(*small_data, roster, bt.BacktestConfig(train_fraction=0.9))
        np.testing.assert_array_equal(daily.records[0].forecast, static.records[0].forecast)
        assert not np.allclose(daily.records[-1].forecast, static.records[-1].forecast)
        assert daily.retrain is bt.Retrain.DAILY


class TestMovingAverage:
    def test_examples(self):
        np.testing.assert_allclose(bt.moving_average([10, 20, 30], 2), [10, 15, 25])
        np.testing.assert_allclose(bt.moving_average([3, 1, 4, 1], 1), [3, 1, 4, 1])
        np.testing.assert_allclose(bt.moving_average([7.0] * 6, 4), 7.0)

    def test_gaps_excluded(self):
        days = [0, 1, 5, 6]
        np.testing.assert_allclose(bt.moving_average([10, 20, 30, 40], 3, days), [10, 15, 30, 35])
        np.testing.assert_allclose(bt.moving_average([10, np.nan, 30], 2), [10, 10, 30])

    def test_window_validated(self):
        with pytest.raises(ValidationError):
            bt.moving_average([1.0], 0)


class TestSummarize:
    def test_mean_of_daily(self, report):
        s = bt.summarize(report)
        E = np.vstack([r.expert_mape for r in report.records])
        np.testing.assert_allclose(s.mape[:-1], E.mean(axis=0))
        assert s.forecaster == pytest.approx(np.mean([r.forecaster_mape for r in report.records]))
        assert s.names[-1] == "Forecaster"

    def test_whole_range(self, report):
        full = bt.summarize(report)
        ranged = bt.summarize(report, report.records[0].day, report.records[-1].day)
        assert full == ranged

    def test_one_day(self, report):
        r = report.records[3]
        s = bt.summarize(report, r.day, r.day)
        np.testing.assert_allclose(s.mape, [*r.expert_mape, r.forecaster_mape])

    def test_empty_and_reversed(self, report):
        with pytest.raises(EmptyRange):
            bt.summarize(report, date(2000, 1, 1), date(2000, 1, 2))
        d = report.records[0].day
        with pytest.raises(EmptyRange):
            bt.summarize(report, d + timedelta(days=1), d)

    def test_family_table_layout(self, report):
        table = bt.summarize(report).family_table()
        assert list(table) == ["LR", "ETR", "ANN", "Forecaster"]
        text = bt.summarize(report).format()
        assert text.splitlines()[1].startswith("no retraining")


class TestPeakFlags:
    def test_threshold_cases(self, report):
        n_hours = 24 * len(report.records)
        assert bt.peak_flags(report, None) == []
        assert bt.peak_flags(report, 1e9) == []
        assert len(bt.peak_flags(report, 0.0)) == n_hours

    def test_single_hour(self):
        f = np.full(24, 100.0)
        f[5] = 2701.0
        rec = bt.DayRecord(1, date(2015, 1, 1), np.full(24, 1.0), f, np.zeros(1), 0.0)
        rep = bt.BacktestReport(["x"], bt.Retrain.NONE, [rec])
        assert bt.peak_flags(rep, 2700.0) == [(date(2015, 1, 1), 5)]


class TestReportFiles:
    def test_written_files(self, report, tmp_path):
        bt.write_report(report, bt.BacktestConfig(), tmp_path)
        for name in ("summary.csv", "daily.csv", "weights.csv", "regret.csv", "flags.csv"):
            assert (tmp_path / name).exists()
        weights = (tmp_path / "weights.csv").read_text().splitlines()
        assert weights[0] == "round,expert,weight,loss_raw,loss_scaled"
        assert len(weights) == 1 + 3 * len(report.records)

    def test_reingest_daily(self, report, tmp_path):
        bt.write_report(report, bt.BacktestConfig(), tmp_path)
        back = bt.read_report(tmp_path)
        assert back.expert_names == report.expert_names
        assert bt.summarize(back) == bt.summarize(report)
        for a, b in zip(back.records, report.records):
            np.testing.assert_array_equal(a.forecast, b.forecast)
        assert [s.day for s in back.skipped] == [s.day for s in report.skipped]
