"""Hourly zonal price scenarios built from monthly regional forecasts.

For each forecast month the zone's historical profile for the same calendar
month is taken from whichever template year (2018, 2019, 2020 by default) has
the monthly average closest to the regional forecast, then shifted by a
constant so its mean equals the forecast.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import CoverageError, DomainError, SchemaError
from ..months import Month, month_range
from .capacity import canonical_region

ANALYSIS_START = Month(2020, 3)
ANALYSIS_END = Month(2022, 12)
TEMPLATE_YEARS = (2018, 2019, 2020)
SCENARIOS = ("counterfactual", "current_expectations")
COUNTERFACTUAL_VINTAGE = "2020-01"
CURRENT_VINTAGE = "2021-01"
ACTUALS_THROUGH = Month(2020, 12)

HOURLY_COLUMNS = ("timestamp", "price_usd_per_mwh")
FORECAST_COLUMNS = ("region", "year", "month", "price_usd_per_mwh", "vintage")


@dataclass(frozen=True, eq=False)
class HourlyPriceSeries:
    zone: str
    scenario: str
    monthly: Mapping[Month, np.ndarray]
    template_years: Mapping[Month, int | None] = field(default_factory=dict)
    shifts: Mapping[Month, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        months = sorted(self.monthly)
        for a, b in zip(months, months[1:]):
            if b.ordinal != a.ordinal + 1:
                raise CoverageError(f"{self.zone}/{self.scenario}: gap between {a} and {b}")
        for m in months:
            if self.monthly[m].shape != (m.hours,):
                raise SchemaError(f"{self.zone}/{self.scenario} {m}: {self.monthly[m].shape[0]} hours, "
                                  f"calendar has {m.hours}")

    @property
    def months(self) -> list[Month]:
        return sorted(self.monthly)

    def month_prices(self, m: Month) -> np.ndarray:
        try:
            return self.monthly[m]
        except KeyError:
            raise CoverageError(f"{self.zone}/{self.scenario}: no prices for {m}") from None

    @property
    def prices(self) -> np.ndarray:
        return np.concatenate([self.monthly[m] for m in self.months])

    def timestamps(self) -> np.ndarray:
        m0 = self.months[0]
        start = np.datetime64(f"{m0}-01T00", "h")
        return start + np.arange(self.prices.shape[0])


def fit_length(profile: np.ndarray, n_hours: int) -> np.ndarray:
    """Truncate, or extend by repeating the final day, to ``n_hours`` values."""
    profile = np.asarray(profile, dtype=float)
    if profile.shape[0] >= n_hours:
        return profile[:n_hours].copy()
    last_day = profile[-24:] if profile.shape[0] >= 24 else profile
    reps = math.ceil((n_hours - profile.shape[0]) / last_day.shape[0])
    return np.concatenate([profile, np.tile(last_day, reps)])[:n_hours]


def select_template(forecast: float, month: Month, historical: Mapping[Month, np.ndarray],
                    years: Sequence[int] = TEMPLATE_YEARS) -> int:
    """Template year whose average for ``month``'s calendar month is nearest ``forecast``.

    Ties go to the more recent year.
    """
    best = None
    for y in years:
        key = Month(y, month.month)
        if key not in historical:
            raise CoverageError(f"no historical prices for template month {key}")
        diff = abs(float(np.mean(historical[key])) - forecast)
        if best is None or diff < best[0] or (diff == best[0] and y > best[1]):
            best = (diff, y)
    return best[1]


def reconstruct_month(forecast: float, month: Month, historical: Mapping[Month, np.ndarray],
                      years: Sequence[int] = TEMPLATE_YEARS) -> tuple[np.ndarray, int, float]:
    """Hourly prices for ``month`` whose mean equals ``forecast``; returns (prices, year, shift)."""
    year = select_template(forecast, month, historical, years)
    profile = fit_length(historical[Month(year, month.month)], month.hours)
    shift = forecast - float(np.mean(profile))
    return profile + shift, year, shift


def build_hourly_scenario(monthly_forecasts: Mapping[Month, float], historical_hourly: Mapping[Month, np.ndarray],
                          zone: str, scenario: str, start: Month = ANALYSIS_START, end: Month = ANALYSIS_END,
                          actuals_through: Month = ACTUALS_THROUGH,
                          years: Sequence[int] = TEMPLATE_YEARS) -> HourlyPriceSeries:
    """Hourly price series for one zone and scenario over ``start..end``.

    ``monthly_forecasts`` is the regional forecast for the scenario's vintage.
    Under ``current_expectations`` months up to ``actuals_through`` use the
    zone's actual hourly prices instead.
    """
    if scenario not in SCENARIOS:
        raise DomainError(f"unknown scenario {scenario!r}")
    monthly, tmpl, shifts = {}, {}, {}
    for m in month_range(start, end):
        if scenario == "current_expectations" and m <= actuals_through:
            if m not in historical_hourly:
                raise CoverageError(f"{zone}: no actual hourly prices for {m}")
            monthly[m] = fit_length(historical_hourly[m], m.hours)
            tmpl[m], shifts[m] = None, 0.0
            continue
        if m not in monthly_forecasts:
            raise CoverageError(f"{zone}/{scenario}: no regional forecast for {m}")
        monthly[m], tmpl[m], shifts[m] = reconstruct_month(float(monthly_forecasts[m]), m, historical_hourly, years)
    return HourlyPriceSeries(zone, scenario, monthly, tmpl, shifts)


# ---------------------------------------------------------------------------
# loaders


def load_hourly_prices(path) -> dict[Month, np.ndarray]:
    """Zone hourly price CSV -> per-month arrays in timestamp order."""
    path = Path(path)
    rows: dict[Month, list[tuple[datetime, float]]] = defaultdict(list)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in HOURLY_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path.name}: missing required column {missing[0]!r}")
        for row in reader:
            try:
                ts = datetime.fromisoformat(row["timestamp"].strip())
                p = float(row["price_usd_per_mwh"])
            except (AttributeError, ValueError):
                raise SchemaError(f"{path.name}:{reader.line_num}: cannot parse row {row}") from None
            if not math.isfinite(p):
                raise SchemaError(f"{path.name}:{reader.line_num}: non-finite price")
            rows[Month(ts.year, ts.month)].append((ts, p))
    out = {}
    for m, vals in sorted(rows.items()):
        vals.sort(key=lambda v: v[0])
        out[m] = np.array([p for _, p in vals])
    return out


def load_monthly_forecasts(path) -> dict[tuple[str, str], dict[Month, float]]:
    """Forecast CSV -> ``{(vintage, region): {month: price}}``."""
    path = Path(path)
    out: dict[tuple[str, str], dict[Month, float]] = defaultdict(dict)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in FORECAST_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path.name}: missing required column {missing[0]!r}")
        for row in reader:
            try:
                m = Month(int(row["year"]), int(row["month"]))
                p = float(row["price_usd_per_mwh"])
            except ValueError:
                raise SchemaError(f"{path.name}:{reader.line_num}: cannot parse row {row}") from None
            key = (str(Month.parse(row["vintage"])), canonical_region(row["region"]))
            if m in out[key]:
                raise SchemaError(f"{path.name}:{reader.line_num}: duplicate forecast for {key} {m}")
            out[key][m] = p
    return dict(out)
