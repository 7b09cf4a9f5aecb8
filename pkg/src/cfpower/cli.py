"""Command-line entry point: ``cfpower {ingest,counterfactual,market,report}``.

Every subcommand reads one JSON config. Relative paths inside it resolve
against the config file's directory. Outputs go to ``--out`` (or the
config's ``output_dir``) and each one carries the config hash and seed so a
result file can be traced back to the run that produced it.

Exit codes: 0 success, 2 input/schema error, 3 numerical failure,
4 coverage gap.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .counterfactual import (FUEL_TARGETS, HEADLINE_TARGETS, ExperimentSpec, check_covers, fuel_split_table,
                             plot_data_csv, reports_to_csv, reports_to_json, run_experiment)
from .errors import CfPowerError, CoverageError, SchemaError
from .gp import FitConfig, model_to_dict
from .ingest import load_series, run_ingest, save_series
from .market.capacity import load_capacity_prices
from .market.finance import MONTHLY_WACC
from .market.fleet import ledgers_to_csv, monthly_aggregates_csv, report_to_json, run_market
from .market.prices import (ACTUALS_THROUGH, ANALYSIS_END, ANALYSIS_START, COUNTERFACTUAL_VINTAGE, CURRENT_VINTAGE,
                            load_hourly_prices, load_monthly_forecasts)
from .market.units import load_units
from .months import Month

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_COVERAGE = 0, 2, 3, 4
SEED_MAX = 2**64 - 1

SERIES_FILE = "series.json"
INGEST_REPORT_FILE = "ingest_report.json"
DEVIATIONS_CSV = "deviations.csv"
DEVIATIONS_JSON = "deviations.json"
FUEL_SPLIT_CSV = "fuel_split.csv"
LEDGERS_CSV = "ledgers.csv"
AT_RISK_JSON = "at_risk.json"
AGGREGATES_CSV = "monthly_aggregates.csv"
REPORT_MD = "report.md"


def config_hash(doc: Mapping) -> str:
    """sha256 of the config in canonical JSON form (key order and whitespace do not matter)."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def _section(doc: Mapping, name: str) -> dict:
    sec = doc.get(name)
    if not isinstance(sec, dict):
        raise SchemaError(f"config: missing or non-object section {name!r}")
    return sec


def _require(sec: Mapping, key: str, where: str):
    if key not in sec:
        raise SchemaError(f"config: {where} is missing required key {key!r}")
    return sec[key]


def _window(raw, where: str) -> tuple[Month, Month]:
    if not (isinstance(raw, (list, tuple)) and len(raw) == 2):
        raise SchemaError(f"config: {where} must be a [start, end] pair of YYYY-MM strings")
    try:
        a, b = Month.parse(raw[0]), Month.parse(raw[1])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"config: {where}: {exc}") from None
    if b < a:
        raise SchemaError(f"config: {where}: end {b} precedes start {a}")
    return a, b


def _seed(raw) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int) or not 0 <= raw <= SEED_MAX:
        raise SchemaError(f"seed must be an integer in [0, 2^64), got {raw!r}")
    return raw


@dataclass(frozen=True)
class RunConfig:
    """A validated config document with paths resolved against its directory."""

    doc: dict
    base: Path
    seed: int
    out: Path
    hash: str = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "hash", config_hash(self.doc))

    @classmethod
    def load(cls, path, out=None, seed: int | None = None) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise SchemaError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path.name}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(doc, dict):
            raise SchemaError(f"{path.name}: top level must be a JSON object")
        base = path.resolve().parent
        seed = _seed(doc.get("seed", 0) if seed is None else seed)
        out_dir = Path(out) if out is not None else base / doc.get("output_dir", "out")
        return cls(doc, base, seed, out_dir)

    def path(self, raw, where: str, must_exist: bool = True) -> Path:
        if not isinstance(raw, str) or not raw:
            raise SchemaError(f"config: {where} must be a non-empty path string")
        p = Path(raw)
        p = p if p.is_absolute() else self.base / p
        if must_exist and not p.exists():
            raise SchemaError(f"config: {where} refers to a missing file: {p}")
        return p

    def meta(self, command: str, **extra) -> dict:
        return {"command": command, "config_sha256": self.hash, "seed": self.seed,
                "tool": f"cfpower {__version__}", **extra}


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _dump(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(cfg: RunConfig) -> list[Path]:
    sec = _section(cfg.doc, "ingest")
    window = _window(_require(sec, "window", "ingest"), "ingest.window")
    column_map = sec.get("column_map")
    if column_map is not None and not isinstance(column_map, dict):
        raise SchemaError("config: ingest.column_map must be an object")
    bundle, report = run_ingest(cfg.path(_require(sec, "generation", "ingest"), "ingest.generation"),
                                cfg.path(_require(sec, "factors", "ingest"), "ingest.factors"),
                                cfg.path(_require(sec, "degree_days", "ingest"), "ingest.degree_days"),
                                window, column_map)
    meta = cfg.meta("ingest")
    cfg.out.mkdir(parents=True, exist_ok=True)
    save_series(bundle, cfg.out / SERIES_FILE, meta)
    rep = _write(cfg.out / INGEST_REPORT_FILE, _dump({"meta": meta, **report.as_dict()}))
    if report.warning_count:
        print(f"cfpower ingest: {report.warning_count} validation warning(s), see {rep}", file=sys.stderr)
    return [cfg.out / SERIES_FILE, rep]


def _series_path(cfg: RunConfig, sec: Mapping) -> Path:
    if "series" in sec:
        return cfg.path(sec["series"], "counterfactual.series")
    p = cfg.out / SERIES_FILE
    if not p.exists():
        raise SchemaError(f"series file {p} not found; run `cfpower ingest` first or set counterfactual.series")
    return p


def _targets(raw, where: str) -> list[str]:
    if isinstance(raw, str):
        raw = [t for t in raw.split(",")]
    if not isinstance(raw, (list, tuple)) or not all(isinstance(t, str) for t in raw):
        raise SchemaError(f"{where} must be a list of series labels")
    out = [t.strip() for t in raw if t.strip()]
    if not out:
        raise SchemaError(f"{where} is empty")
    return out


def cmd_counterfactual(cfg: RunConfig, targets: Sequence[str] | None = None) -> list[Path]:
    sec = _section(cfg.doc, "counterfactual")
    bundle = load_series(_series_path(cfg, sec))
    targets = list(targets) if targets is not None else _targets(sec.get("targets", list(HEADLINE_TARGETS)),
                                                                 "counterfactual.targets")
    fuels = _targets(sec.get("fuel_targets", list(FUEL_TARGETS)), "counterfactual.fuel_targets") \
        if sec.get("fuel_targets", True) else []
    n_restarts = sec.get("n_restarts", 5)
    if isinstance(n_restarts, bool) or not isinstance(n_restarts, int) or n_restarts < 1:
        raise SchemaError("config: counterfactual.n_restarts must be a positive integer")
    fit_config = FitConfig(n_restarts=n_restarts, seed=cfg.seed)
    kw = dict(train=_window(sec.get("train", ["2016-01", "2020-02"]), "counterfactual.train"),
              forecast=_window(sec.get("forecast", ["2020-03", "2020-12"]), "counterfactual.forecast"),
              covariates=tuple(sec.get("covariates", ("HDD", "CDD"))), fit_config=fit_config)
    for label in list(targets) + fuels:
        if label not in bundle:
            raise SchemaError(f"series file has no series {label!r} (available: {', '.join(sorted(bundle))})")
    specs = {label: ExperimentSpec(label, **kw) for label in dict.fromkeys(list(targets) + fuels)}
    for spec in specs.values():
        check_covers(bundle, spec)
    results = {label: run_experiment(bundle, spec) for label, spec in specs.items()}

    meta = cfg.meta("counterfactual", targets=",".join(targets))
    written = [
        _write(cfg.out / DEVIATIONS_CSV, reports_to_csv([results[t].report for t in targets], meta)),
    ]
    fuel_rows = fuel_split_table({f: results[f] for f in fuels}) if fuels else None
    written.append(_write(cfg.out / DEVIATIONS_JSON,
                          reports_to_json([results[t].report for t in targets], meta, fuel_rows)))
    if fuels:
        lines = [f"# {k}={v}" for k, v in sorted(meta.items())]
        lines.append("target,counterfactual_average,observed_average,average_percent_deviation")
        lines += [f"{r['target']},{r['counterfactual_average']!r},{r['observed_average']!r},"
                  f"{r['average_percent_deviation']:.6f}" for r in fuel_rows]
        written.append(_write(cfg.out / FUEL_SPLIT_CSV, "\n".join(lines) + "\n"))
    for label, res in results.items():
        written.append(_write(cfg.out / "plot_data" / f"{label}.csv", plot_data_csv(res, bundle, specs[label], meta)))
        written.append(_write(cfg.out / "models" / f"{label}.json", _dump({"meta": meta, **model_to_dict(res.model)})))
    return written


def cmd_market(cfg: RunConfig) -> list[Path]:
    sec = _section(cfg.doc, "market")
    units = load_units(cfg.path(_require(sec, "units", "market"), "market.units"))
    hourly_paths = _require(sec, "hourly_prices", "market")
    if not isinstance(hourly_paths, dict) or not hourly_paths:
        raise SchemaError("config: market.hourly_prices must map zone names to CSV paths")
    historical = {z: load_hourly_prices(cfg.path(p, f"market.hourly_prices.{z}")) for z, p in hourly_paths.items()}
    forecasts = load_monthly_forecasts(cfg.path(_require(sec, "forecasts", "market"), "market.forecasts"))
    books = load_capacity_prices(cfg.path(_require(sec, "capacity_prices", "market"), "market.capacity_prices"))
    rate = sec.get("monthly_rate", MONTHLY_WACC)
    if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not rate > -1:
        raise SchemaError("config: market.monthly_rate must be a number > -1")
    start, end = _window(sec.get("window", [str(ANALYSIS_START), str(ANALYSIS_END)]), "market.window")
    vintages = sec.get("vintages", {"counterfactual": COUNTERFACTUAL_VINTAGE, "current_expectations": CURRENT_VINTAGE})
    if not isinstance(vintages, dict) or set(vintages) != {"counterfactual", "current_expectations"}:
        raise SchemaError("config: market.vintages must name exactly 'counterfactual' and 'current_expectations'")
    vintages = {k: str(Month.parse(v)) for k, v in vintages.items()}
    # null switches off the substitution of actual prices for the current scenario
    raw_actuals = sec.get("actuals_through", str(ACTUALS_THROUGH))
    actuals_through = start - 1 if raw_actuals is None else Month.parse(raw_actuals)

    result = run_market(units, historical, forecasts, books, float(rate), start=start, end=end,
                        actuals_through=actuals_through, vintages=vintages)
    meta = cfg.meta("market")
    return [
        _write(cfg.out / LEDGERS_CSV, ledgers_to_csv(result, meta)),
        _write(cfg.out / AT_RISK_JSON, report_to_json(result.report, meta)),
        _write(cfg.out / AGGREGATES_CSV, monthly_aggregates_csv(result.report, meta)),
    ]


def _read_json(path: Path, hint: str) -> dict:
    if not path.exists():
        raise CoverageError(f"{path} not found; run `cfpower {hint}` first")
    return json.loads(path.read_text())


def cmd_report(cfg: RunConfig) -> list[Path]:
    """Markdown summary of whatever counterfactual and market outputs exist in the output directory."""
    dev_path, risk_path = cfg.out / DEVIATIONS_JSON, cfg.out / AT_RISK_JSON
    if not dev_path.exists() and not risk_path.exists():
        raise CoverageError(f"no results in {cfg.out}; run `cfpower counterfactual` or `cfpower market` first")
    lines = ["# cfpower summary", "", f"- config sha256: `{cfg.hash}`", f"- seed: {cfg.seed}", ""]
    if dev_path.exists():
        dev = _read_json(dev_path, "counterfactual")
        lines += ["## Deviations from counterfactual", ""]
        for rep in dev["reports"]:
            sig = ", ".join(rep["significant_months"]) or "none"
            lines.append(f"### {rep['target']}")
            lines.append("")
            lines.append("| month | observed | counterfactual | deviation % | significant |")
            lines.append("|---|---|---|---|---|")
            for r in rep["months"]:
                lines.append(f"| {r['month']} | {r['observed']:.4g} | {r['mean']:.4g} | "
                             f"{r['percent_deviation']:+.1f} | {'yes' if r['significant'] else 'no'} |")
            lines += ["", f"Average deviation {rep['average_percent_deviation']:+.1f}%; "
                          f"significant months: {sig}.", ""]
        if dev.get("fuel_split"):
            lines += ["### Emissions by fuel", "", "| fuel | counterfactual avg | observed avg | deviation % |",
                      "|---|---|---|---|"]
            for r in dev["fuel_split"]:
                lines.append(f"| {r['target']} | {r['counterfactual_average']:.4g} | {r['observed_average']:.4g} | "
                             f"{r['average_percent_deviation']:+.1f} |")
            lines.append("")
    if risk_path.exists():
        risk = _read_json(risk_path, "market")
        pv = risk["pv_profit"]
        lines += ["## Coal fleet profitability", "",
                  f"- units analysed: {risk['fleet_units']} ({risk['fleet_mw']:.0f} MW)",
                  f"- PV profit, counterfactual prices: ${pv['counterfactual'] / 1e6:,.2f}M",
                  f"- PV profit, current expectations: ${pv['current_expectations'] / 1e6:,.2f}M",
                  f"- PV profit delta: ${risk['pv_profit_delta'] / 1e6:,.2f}M "
                  f"(through 2020: ${risk['pv_profit_delta_through_2020'] / 1e6:,.2f}M)",
                  f"- at risk of retirement: {risk['count']} unit(s), {risk['total_mw']:.0f} MW, "
                  f"{100 * risk['share_of_fleet_mw']:.1f}% of analysed capacity"]
        if risk["at_risk"]:
            lines.append(f"- at-risk units: {', '.join(risk['at_risk'])}")
        lines.append("")
    return [_write(cfg.out / REPORT_MD, "\n".join(lines))]


# ---------------------------------------------------------------------------
# argument parsing


def _u64(text: str) -> int:
    try:
        return _seed(int(text))
    except (ValueError, SchemaError):
        raise argparse.ArgumentTypeError(f"expected an unsigned 64-bit integer, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfpower", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    common.add_argument("--seed", type=_u64, default=None, help="override the config seed")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="build monthly national series from plant-level files")
    cf = sub.add_parser("counterfactual", parents=[common], help="fit GPs and score 2020 deviations")
    cf.add_argument("--targets", default=None, help="comma-separated series labels (default: config)")
    sub.add_parser("market", parents=[common], help="value the coal fleet under both price scenarios")
    sub.add_parser("report", parents=[common], help="summarise existing outputs as markdown")
    return parser


COMMANDS = {"ingest": cmd_ingest, "counterfactual": cmd_counterfactual, "market": cmd_market, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.out, args.seed)
        if args.command == "counterfactual":
            targets = _targets(args.targets, "--targets") if args.targets is not None else None
            written = cmd_counterfactual(cfg, targets)
        else:
            written = COMMANDS[args.command](cfg)
    except CfPowerError as exc:
        print(f"cfpower {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"cfpower {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"cfpower {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for p in written:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
