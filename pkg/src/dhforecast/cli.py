"""Command-line front end: ``generate``, ``tune``, ``backtest`` and ``report``.

A run is described by one JSON file (see :class:`RunConfig`); flags given on
the command line override the file.  Exit codes: 0 success, 1 invalid input
or configuration, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Any

from . import aggregation as agg
from . import backtest as bt
from .datagen import DtProfile, GeneratorConfig, autocorrelation, generate, ppmcc
from .errors import ForecastError, ValidationError
from .experts import Family, build_roster
from .experts.gridsearch import grid_search_cv
from .features import FeatureSetKind, build_matrix
from .timeseries import HourlySeries, align, day_start, read_csv, split_day, write_csv

logger = logging.getLogger("dhforecast")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

DATA_FILES = {"load": "load.csv", "dt": "dt.csv", "temp_forecast": "temp_forecast.csv"}

# brackets around the default hyper-parameters
DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "etr": {"n_trees": [50, 100, 200], "min_leaf": [3, 7, 15]},
    "ann": {"epochs": [100, 200], "batch": [10, 50]},
    "svm": {"C": [100.0, 1000.0, 10000.0], "gamma": [1e-6, 1e-5, 1e-4], "epsilon": [0.001, 0.01, 0.1]},
}


def default_generator() -> dict[str, Any]:
    cfg = GeneratorConfig(dt_profile=DtProfile(), outages=[("2016-11-17", "2016-11-29")])
    d = cfg.to_dict()
    del d["seed"]
    return d


@dataclass
class RunConfig:
    """Everything needed to reproduce a run.

    ``data`` names the three input CSVs; when it is None the series come from
    ``generator``.  ``seed`` is the only source of randomness: it seeds the
    generator and is fanned out to one seed per expert.
    """

    seed: int = 0
    out: str = "run"
    data: dict[str, str] | None = None
    generator: dict[str, Any] = field(default_factory=default_generator)
    backtest: dict[str, Any] = field(default_factory=dict)
    aggregator: dict[str, Any] = field(default_factory=dict)
    experts: list[str] | None = None  # roster subset by name, None for all eight
    overrides: dict[str, dict[str, Any]] = field(default_factory=dict)
    selected_params: str | None = None
    tuning: dict[str, Any] = field(default_factory=lambda: {"folds": 5, "grids": DEFAULT_GRIDS})

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> RunConfig:
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        if "seed" in cfg.generator:
            raise ValidationError("generator.seed is not allowed; use the top-level seed")
        return cfg

    @classmethod
    def load(cls, path: str | Path | None) -> RunConfig:
        if path is None:
            return cls()
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValidationError(f"{path}: top level must be an object")
        return cls.from_dict(raw)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig.from_dict({**self.generator, "seed": self.seed})

    def aggregator_config(self) -> agg.AggregatorConfig:
        known = {"rule", "eta", "alpha", "initial_weights", "paper_literal"}
        unknown = set(self.aggregator) - known
        if unknown:
            raise ValidationError(f"unknown aggregator keys: {sorted(unknown)}")
        try:
            return agg.AggregatorConfig(**self.aggregator)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc

    def backtest_config(self) -> bt.BacktestConfig:
        b = dict(self.backtest)
        known = set(bt.BacktestConfig.__dataclass_fields__) - {"aggregator"}
        unknown = set(b) - known
        if unknown:
            raise ValidationError(f"unknown backtest keys: {sorted(unknown)}")
        if b.get("summary_range") is not None:
            b["summary_range"] = parse_range(b["summary_range"])
        try:
            return bt.BacktestConfig(aggregator=self.aggregator_config(), **b)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc

    def expert_overrides(self) -> dict[str, dict[str, Any]]:
        params: dict[str, dict[str, Any]] = {}
        if self.selected_params is not None:
            params.update(json.loads(Path(self.selected_params).read_text()))
        for fam, values in self.overrides.items():
            params[fam] = {**params.get(fam, {}), **values}
        try:
            return {Family(k).value: v for k, v in params.items()}
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc

    def roster(self):
        specs = build_roster(self.seed, self.expert_overrides())
        if self.experts is None:
            return specs
        names = {s.name for s in specs}
        missing = set(self.experts) - names
        if missing:
            raise ValidationError(f"unknown experts {sorted(missing)}; choose from {sorted(names)}")
        return [s for s in specs if s.name in self.experts]


def parse_range(value) -> tuple[date, date]:
    """``"START:END"`` or a two-item list of ISO dates."""
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 2:
            raise ValidationError(f"range must be START:END, got {value!r}")
    else:
        parts = list(value)
    try:
        a, b = (date.fromisoformat(str(p)) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"bad date in range: {exc}") from exc
    if a > b:
        raise ValidationError(f"range {a}..{b} is reversed")
    return a, b


def load_series(cfg: RunConfig) -> tuple[HourlySeries, HourlySeries, HourlySeries]:
    if cfg.data is None:
        return generate(cfg.generator_config())
    missing = set(DATA_FILES) - set(cfg.data)
    if missing:
        raise ValidationError(f"data section lacks {sorted(missing)}")
    return tuple(read_csv(cfg.data[k], k) for k in DATA_FILES)  # type: ignore[return-value]


def apply_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.out is not None:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.backtest["jobs"] = args.jobs
    if args.retrain is not None:
        cfg.backtest["retrain"] = args.retrain
    if args.range is not None:
        a, b = parse_range(args.range)
        cfg.backtest["summary_range"] = [a.isoformat(), b.isoformat()]
    if args.aggregator is not None:
        cfg.aggregator["rule"] = args.aggregator
    if args.eta is not None:
        cfg.aggregator["eta"] = args.eta
    if args.alpha is not None:
        cfg.aggregator["alpha"] = args.alpha
    if args.paper_literal_fs:
        cfg.aggregator["paper_literal"] = True
    return cfg


# -- commands -----------------------------------------------------------------


def cmd_generate(cfg: RunConfig) -> int:
    load, dt, temp = generate(cfg.generator_config())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for series, name in zip((load, dt, temp), DATA_FILES.values()):
        write_csv(series, out / name)
    _, _, (l, t) = align([load, temp])
    ac = autocorrelation(load, 168)
    print(f"wrote {len(load)} hours to {out}")
    print(f"PPMCC(load, temperature forecast) = {ppmcc(l, t):.3f}")
    print(f"autocorrelation lag 24 = {ac[24]:.3f}, lag 100 = {ac[100]:.3f}, lag 168 = {ac[168]:.3f}")
    return EXIT_OK


def cmd_tune(cfg: RunConfig) -> int:
    load, dt, temp = load_series(cfg)
    _, _, (load, dt, temp) = align([load, dt, temp])
    bcfg = cfg.backtest_config()
    first_test = split_day(load, bcfg.train_fraction, bcfg.offset_hours)
    train = build_matrix(
        load.between(None, day_start(first_test, bcfg.offset_hours)),
        dt,
        temp,
        FeatureSetKind.FULL,
        offset_hours=bcfg.offset_hours,
    )
    folds = int(cfg.tuning.get("folds", 5))
    grids = cfg.tuning.get("grids", DEFAULT_GRIDS)
    out = Path(cfg.out) / "tuning"
    out.mkdir(parents=True, exist_ok=True)
    selected: dict[str, dict[str, Any]] = {}
    for fam_name in sorted(grids):
        family = Family(fam_name)
        base = cfg.overrides.get(family.value, {})
        res = grid_search_cv(family, grids[fam_name], train, folds, cfg.seed, base)
        res.to_csv(out / f"{family.value}.csv")
        selected[family.value] = {**base, **res.best_params}
        print(f"{family.label}: {selected[family.value]}")
    (out / "selected.json").write_text(json.dumps(selected, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_backtest(cfg: RunConfig) -> int:
    bcfg = cfg.backtest_config()
    roster = cfg.roster()
    load, dt, temp = load_series(cfg)
    report = bt.run(load, dt, temp, roster, bcfg)
    out = Path(cfg.out)
    summary = bt.write_report(report, bcfg, out)
    # the output path is left out so identical runs give identical trees
    saved = {k: v for k, v in asdict(cfg).items() if k != "out"}
    (out / "run_config.json").write_text(json.dumps(saved, indent=2, sort_keys=True) + "\n")
    print(summary.format())
    name, best = summary.best_expert()
    gap = summary.forecaster - best
    print(f"forecaster {summary.forecaster:.2f}% vs best expert {name} {best:.2f}% (gap {gap:+.2f} pp)")
    print(f"scored {len(report.records)} days, skipped {len(report.skipped)}")
    return EXIT_OK


def cmd_report(run_dir: str | Path, range_: str | None, out_dir: str | Path | None = None) -> int:
    run_dir = Path(run_dir)
    if not (run_dir / "daily.csv").exists():
        raise FileNotFoundError(f"{run_dir / 'daily.csv'} not found")
    window = 30
    threshold = 2700.0
    cfg_path = run_dir / "run_config.json"
    if cfg_path.exists():
        bcfg = RunConfig.load(cfg_path).backtest_config()
        window, threshold = bcfg.moving_average_window_days, bcfg.peak_threshold_kw
    report = bt.read_report(run_dir)
    if range_ is None:
        start = end = None
        tag = "all"
    else:
        start, end = parse_range(range_)
        tag = f"{start.isoformat()}_{end.isoformat()}"
    summary = bt.summarize(report, start, end)
    report.records = [r for r in report.records if r.day >= summary.first and r.day <= summary.last]
    out = Path(out_dir) if out_dir is not None else run_dir / f"report_{tag}"
    out.mkdir(parents=True, exist_ok=True)
    bt.write_summary(summary, out / "summary.csv")
    bt.write_family_table(summary, out / "summary_table.csv")
    bt.write_moving_average(report, window, out / "moving_average.csv")
    bt.write_forecast_hours(report, out / "forecast.csv")
    flags = bt.peak_flags(report, threshold)
    print(summary.format())
    print(f"{summary.first}..{summary.last}: {len(report.records)} scored days, {len(flags)} peak hours")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="parallel expert fits")
    common.add_argument("--retrain", choices=[r.value for r in bt.Retrain])
    common.add_argument("--aggregator", choices=[r.value for r in agg.Rule])
    common.add_argument("--eta", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--range", help="summary date range START:END (ISO dates)")
    common.add_argument(
        "--paper-literal-fs",
        action="store_true",
        help="fixed share with the cumulative loss in the exponent",
    )
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dhforecast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write synthetic load, dT and temperature CSVs")
    sub.add_parser("tune", parents=[common], help="grid-search hyper-parameters per family")
    sub.add_parser("backtest", parents=[common], help="run the day-by-day backtest")
    rep = sub.add_parser("report", parents=[common], help="summarize a finished run over a date range")
    rep.add_argument("run_dir")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "report":
            return cmd_report(args.run_dir, args.range, args.out)
        cfg = apply_flags(RunConfig.load(args.config), args)
        return {"generate": cmd_generate, "tune": cmd_tune, "backtest": cmd_backtest}[args.command](cfg)
    except (ForecastError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
