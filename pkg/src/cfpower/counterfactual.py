"""Counterfactual forecasts and the 95% CI decision rule.

A GP is fitted on the pre-pandemic window (default Jan 2016 - Feb 2020) with
observed HDD/CDD as covariates, then used to forecast Mar - Dec 2020. Observed
values outside the forecast's 95% interval are flagged as significant.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import CoverageError, DegenerateTargetError, SchemaError
from .gp import FitConfig, GpModel, PredictiveDistribution, Z95, default_kernel, fit, kernel_eval, predict
from .ingest import MonthlySeries
from .months import Month, month_range

FUEL_TARGETS = ("C_coal", "C_gas", "C_oil")
HEADLINE_TARGETS = ("C", "E", "C_over_E")


@dataclass(frozen=True)
class ExperimentSpec:
    target: str
    covariates: tuple[str, ...] = ("HDD", "CDD")
    train: tuple[Month, Month] = (Month(2016, 1), Month(2020, 2))
    forecast: tuple[Month, Month] = (Month(2020, 3), Month(2020, 12))
    fit_config: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self) -> None:
        train = tuple(Month.parse(m) for m in self.train)
        forecast = tuple(Month.parse(m) for m in self.forecast)
        if train[1] < train[0] or forecast[1] < forecast[0]:
            raise SchemaError("window end precedes window start")
        if not train[1] < forecast[0]:
            raise SchemaError(f"training window must end before the forecast starts ({train[1]} >= {forecast[0]})")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "forecast", forecast)
        object.__setattr__(self, "covariates", tuple(self.covariates))

    @property
    def train_months(self) -> list[Month]:
        return month_range(*self.train)

    @property
    def forecast_months(self) -> list[Month]:
        return month_range(*self.forecast)


@dataclass(frozen=True)
class MonthDeviation:
    month: Month
    observed: float
    mean: float
    variance: float
    percent_deviation: float
    ci_halfwidth_pct: float
    significant: bool


@dataclass(frozen=True)
class DeviationReport:
    target: str
    rows: tuple[MonthDeviation, ...]

    @property
    def average_percent_deviation(self) -> float:
        return float(np.mean([r.percent_deviation for r in self.rows]))

    @property
    def observed_average(self) -> float:
        return float(np.mean([r.observed for r in self.rows]))

    @property
    def counterfactual_average(self) -> float:
        return float(np.mean([r.mean for r in self.rows]))

    @property
    def significant_months(self) -> list[Month]:
        return [r.month for r in self.rows if r.significant]

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "months": [
                {
                    "month": str(r.month),
                    "observed": r.observed,
                    "mean": r.mean,
                    "variance": r.variance,
                    "percent_deviation": r.percent_deviation,
                    "ci_halfwidth_pct": r.ci_halfwidth_pct,
                    "significant": r.significant,
                }
                for r in self.rows
            ],
            "average_percent_deviation": self.average_percent_deviation,
            "observed_average": self.observed_average,
            "counterfactual_average": self.counterfactual_average,
            "n_significant": len(self.significant_months),
            "significant_months": [str(m) for m in self.significant_months],
        }


class ExperimentResult(NamedTuple):
    model: GpModel
    forecast: PredictiveDistribution
    report: DeviationReport


def significance_verdict(dist: PredictiveDistribution, observed) -> np.ndarray:
    observed = np.asarray(observed, dtype=float)
    if observed.shape != dist.mean.shape:
        raise SchemaError(f"{observed.shape[0]} observations for {dist.mean.shape[0]} forecast months")
    return (observed < dist.ci95_lower) | (observed > dist.ci95_upper)


def deviation_report(target: str, dist: PredictiveDistribution, observed) -> DeviationReport:
    observed = np.asarray(observed, dtype=float)
    verdict = significance_verdict(dist, observed)
    rows = []
    for i, m in enumerate(dist.months):
        mean, var = float(dist.mean[i]), float(dist.variance[i])
        rows.append(MonthDeviation(
            month=m,
            observed=float(observed[i]),
            mean=mean,
            variance=var,
            percent_deviation=100.0 * (observed[i] - mean) / mean,
            ci_halfwidth_pct=100.0 * Z95 * np.sqrt(var) / mean,
            significant=bool(verdict[i]),
        ))
    return DeviationReport(target, tuple(rows))


def design_matrix(bundle: Mapping[str, MonthlySeries], months: Sequence[Month],
                  covariates: Sequence[str]) -> np.ndarray:
    """Columns: month ordinal, then each covariate's observed value."""
    cols = [np.array([m.ordinal for m in months], dtype=float)]
    for label in covariates:
        cols.append(_series(bundle, label).window(months[0], months[-1]))
    return np.column_stack(cols)


def _series(bundle: Mapping[str, MonthlySeries], label: str) -> MonthlySeries:
    try:
        return bundle[label]
    except KeyError:
        raise SchemaError(f"series {label!r} not in bundle (have {sorted(bundle)})") from None


def run_experiment(bundle: Mapping[str, MonthlySeries], spec: ExperimentSpec) -> ExperimentResult:
    train_m, fc_m = spec.train_months, spec.forecast_months
    target = _series(bundle, spec.target)
    y_train = target.window(*spec.train)
    y_obs = target.window(*spec.forecast)
    if np.ptp(y_train) == 0:
        raise DegenerateTargetError(f"{spec.target} is constant over the training window")
    kernel = default_kernel(len(spec.covariates))
    model = fit(design_matrix(bundle, train_m, spec.covariates), y_train, kernel, spec.fit_config)
    dist = predict(model, design_matrix(bundle, fc_m, spec.covariates), months=fc_m)
    return ExperimentResult(model, dist, deviation_report(spec.target, dist, y_obs))


def run_headline(bundle: Mapping[str, MonthlySeries], targets: Sequence[str] = HEADLINE_TARGETS,
                 **spec_kwargs) -> dict[str, ExperimentResult]:
    return {t: run_experiment(bundle, ExperimentSpec(t, **spec_kwargs)) for t in targets}


def fuel_split_experiment(bundle: Mapping[str, MonthlySeries], spec: ExperimentSpec | None = None,
                          fuels: Sequence[str] = FUEL_TARGETS) -> dict[str, ExperimentResult]:
    """Run ``spec`` (target ignored) for each fuel-specific emissions series."""
    spec = spec or ExperimentSpec("C")
    out = {}
    for label in fuels:
        fuel_spec = ExperimentSpec(label, spec.covariates, spec.train, spec.forecast, spec.fit_config)
        out[label] = run_experiment(bundle, fuel_spec)
    return out


def fuel_split_table(results: Mapping[str, ExperimentResult]) -> list[dict]:
    return [
        {
            "target": label,
            "counterfactual_average": r.report.counterfactual_average,
            "observed_average": r.report.observed_average,
            "average_percent_deviation": r.report.average_percent_deviation,
        }
        for label, r in results.items()
    ]


# ---------------------------------------------------------------------------
# outputs


def _comment_header(meta: Mapping | None) -> str:
    if not meta:
        return ""
    return "".join(f"# {k}={v}\n" for k, v in sorted(meta.items()))


def reports_to_csv(reports: Sequence[DeviationReport], meta: Mapping | None = None) -> str:
    buf = io.StringIO()
    buf.write(_comment_header(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["target", "month", "observed", "counterfactual_mean", "percent_deviation",
                "ci95_halfwidth_pct", "significant"])
    for rep in reports:
        for r in rep.rows:
            w.writerow([rep.target, str(r.month), repr(r.observed), repr(r.mean), f"{r.percent_deviation:.6f}",
                        f"{r.ci_halfwidth_pct:.6f}", str(r.significant).lower()])
        w.writerow([rep.target, "average", repr(rep.observed_average), repr(rep.counterfactual_average),
                    f"{rep.average_percent_deviation:.6f}", "", ""])
    return buf.getvalue()


def reports_to_json(reports: Sequence[DeviationReport], meta: Mapping | None = None,
                    fuel_table: Sequence[dict] | None = None) -> str:
    doc = {"meta": dict(meta or {}), "reports": [r.to_dict() for r in reports]}
    if fuel_table is not None:
        doc["fuel_split"] = list(fuel_table)
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def plot_data_csv(result: ExperimentResult, bundle: Mapping[str, MonthlySeries], spec: ExperimentSpec,
                  meta: Mapping | None = None) -> str:
    """Per-month observed value, GP mean and 95% bounds for training and forecast months."""
    train_m = spec.train_months
    hist = predict(result.model, design_matrix(bundle, train_m, spec.covariates), months=train_m)
    target = _series(bundle, spec.target)
    buf = io.StringIO()
    buf.write(_comment_header(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["target", "month", "phase", "observed", "mean", "ci95_lower", "ci95_upper"])
    for phase, dist, obs in (("train", hist, target.window(*spec.train)),
                             ("forecast", result.forecast, target.window(*spec.forecast))):
        for i, m in enumerate(dist.months):
            w.writerow([spec.target, str(m), phase, repr(float(obs[i])), repr(float(dist.mean[i])),
                        repr(float(dist.ci95_lower[i])), repr(float(dist.ci95_upper[i]))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# calibration harness


def simulate_from_model(model: GpModel, X_raw, rng: np.random.Generator) -> np.ndarray:
    """One draw of noisy observations from the model's prior at raw inputs ``X_raw``."""
    Xs = model.standardization.inputs(X_raw)
    K = kernel_eval(model.kernel, Xs) + model.noise_variance * np.eye(Xs.shape[0])
    w, V = np.linalg.eigh(K)
    z = V @ (np.sqrt(np.clip(w, 0, None)) * rng.standard_normal(Xs.shape[0]))
    return model.standardization.restore_targets(z)


def calibration_trials(model: GpModel, X_train, X_forecast, n_trials: int, seed: int = 0,
                       fit_config: FitConfig | None = None) -> np.ndarray:
    """Significance flags from refitting on data simulated with no intervention.

    Returns a boolean array ``(n_trials, n_forecast)``. Under a well-calibrated
    model about 5% of entries are True.
    """
    X_train = np.asarray(X_train, dtype=float)
    X_forecast = np.asarray(X_forecast, dtype=float)
    X_all = np.vstack([X_train, X_forecast])
    n_tr = X_train.shape[0]
    rng = np.random.default_rng(seed)
    flags = np.zeros((n_trials, X_forecast.shape[0]), dtype=bool)
    for k in range(n_trials):
        y = simulate_from_model(model, X_all, rng)
        cfg = fit_config or FitConfig(seed=seed + k)
        m = fit(X_train, y[:n_tr], model.kernel, cfg)
        flags[k] = significance_verdict(predict(m, X_forecast), y[n_tr:])
    return flags


def check_covers(bundle: Mapping[str, MonthlySeries], spec: ExperimentSpec) -> None:
    for label in (spec.target, *spec.covariates):
        s = _series(bundle, label)
        if s.months[0] > spec.train[0] or s.months[-1] < spec.forecast[1]:
            raise CoverageError(f"{label} does not cover {spec.train[0]}..{spec.forecast[1]}")
