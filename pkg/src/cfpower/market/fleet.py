"""Fleet valuation under both price scenarios and at-risk classification."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import CoverageError, SchemaError
from ..months import Month
from .capacity import CAPACITY_REGIONS, CapacityAuctionBook, extrapolate_book
from .finance import MONTHLY_WACC, CashFlowLedger, MarketScenario, npv, unit_profitability
from .prices import (ACTUALS_THROUGH, ANALYSIS_END, ANALYSIS_START, COUNTERFACTUAL_VINTAGE, CURRENT_VINTAGE,
                     build_hourly_scenario)
from .units import GenerationUnit, analysis_fleet


@dataclass(frozen=True)
class AtRiskReport:
    at_risk: tuple[str, ...]
    count: int
    total_mw: float
    share_of_fleet_mw: float
    mean_age_years: float | None
    mean_capacity_mw: float | None
    zone_counts: dict[str, int]
    region_counts: dict[str, int]
    fleet_units: int
    fleet_mw: float
    pv_profit: dict[str, float]
    pv_profit_delta: float
    pv_profit_delta_through_2020: float
    monthly: dict[str, dict[str, list[float]]]
    months: tuple[Month, ...]

    def to_dict(self) -> dict:
        return {
            "at_risk": list(self.at_risk),
            "count": self.count,
            "total_mw": self.total_mw,
            "share_of_fleet_mw": self.share_of_fleet_mw,
            "mean_age_years": self.mean_age_years,
            "mean_capacity_mw": self.mean_capacity_mw,
            "zone_counts": dict(sorted(self.zone_counts.items())),
            "region_counts": dict(sorted(self.region_counts.items())),
            "fleet_units": self.fleet_units,
            "fleet_mw": self.fleet_mw,
            "pv_profit": dict(self.pv_profit),
            "pv_profit_delta": self.pv_profit_delta,
            "pv_profit_delta_through_2020": self.pv_profit_delta_through_2020,
        }


def _fleet_streams(ledgers: Sequence[CashFlowLedger]) -> dict[str, np.ndarray]:
    return {
        "revenue": np.sum([l.revenue for l in ledgers], axis=0),
        "cost": np.sum([l.cost for l in ledgers], axis=0),
        "profit": np.sum([l.net for l in ledgers], axis=0),
    }


def classify_at_risk(fleet: Sequence[GenerationUnit], counterfactual: Mapping[str, CashFlowLedger],
                     current: Mapping[str, CashFlowLedger], as_of: Month = ANALYSIS_START) -> AtRiskReport:
    """Units with non-negative discounted profit under counterfactual prices and negative under current ones."""
    fleet = analysis_fleet(fleet)
    ids = {u.unit_id for u in fleet}
    if set(counterfactual) != ids or set(current) != ids:
        raise SchemaError("ledgers do not cover the same fleet")
    at_risk = [u for u in fleet
               if counterfactual[u.unit_id].discounted_total >= 0 and current[u.unit_id].discounted_total < 0]
    fleet_mw = float(sum(u.capacity_mw for u in fleet))
    risk_mw = float(sum(u.capacity_mw for u in at_risk))

    cf_l = [counterfactual[u.unit_id] for u in fleet]
    cur_l = [current[u.unit_id] for u in fleet]
    months = cf_l[0].months if cf_l else ()
    streams = {"counterfactual": _fleet_streams(cf_l), "current_expectations": _fleet_streams(cur_l)}
    rate = cf_l[0].rate if cf_l else MONTHLY_WACC
    pv = {k: npv(v["profit"], rate) if cf_l else 0.0 for k, v in streams.items()}
    n2020 = sum(1 for m in months if m <= ACTUALS_THROUGH)
    pv2020 = {k: npv(v["profit"][:n2020], rate) if cf_l else 0.0 for k, v in streams.items()}

    return AtRiskReport(
        at_risk=tuple(u.unit_id for u in at_risk),
        count=len(at_risk),
        total_mw=risk_mw,
        share_of_fleet_mw=risk_mw / fleet_mw if fleet_mw else 0.0,
        mean_age_years=float(np.mean([u.age_years(as_of) for u in at_risk])) if at_risk else None,
        mean_capacity_mw=risk_mw / len(at_risk) if at_risk else None,
        zone_counts=dict(Counter(u.zone for u in at_risk)),
        region_counts=dict(Counter(u.region for u in at_risk)),
        fleet_units=len(fleet),
        fleet_mw=fleet_mw,
        pv_profit=pv,
        pv_profit_delta=pv["counterfactual"] - pv["current_expectations"],
        pv_profit_delta_through_2020=pv2020["counterfactual"] - pv2020["current_expectations"],
        monthly={k: {kk: vv.tolist() for kk, vv in v.items()} for k, v in streams.items()},
        months=tuple(months),
    )


@dataclass(frozen=True, eq=False)
class MarketResult:
    fleet: tuple[GenerationUnit, ...]
    scenarios: dict[str, MarketScenario]
    ledgers: dict[str, dict[str, CashFlowLedger]]
    report: AtRiskReport


def build_scenarios(fleet: Sequence[GenerationUnit], historical: Mapping[str, Mapping[Month, np.ndarray]],
                    forecasts: Mapping[tuple[str, str], Mapping[Month, float]],
                    books: Mapping[str, CapacityAuctionBook], rate: float = MONTHLY_WACC,
                    start: Month = ANALYSIS_START, end: Month = ANALYSIS_END,
                    actuals_through: Month = ACTUALS_THROUGH,
                    vintages: Mapping[str, str] | None = None) -> dict[str, MarketScenario]:
    """Both price scenarios for every zone that hosts a unit of ``fleet``.

    The regional forecast is applied to every zone in the region. Capacity
    books are completed by extrapolation for periods without published prices.
    """
    vintages = dict(vintages or {"counterfactual": COUNTERFACTUAL_VINTAGE,
                                 "current_expectations": CURRENT_VINTAGE})
    zones = sorted({(u.zone, u.region) for u in fleet})
    filled = {}
    for region in sorted({u.region for u in fleet} & CAPACITY_REGIONS):
        if region not in books:
            raise CoverageError(f"no capacity prices for {region}")
        region_zones = [z for z, r in zones if r == region]
        filled[region] = extrapolate_book(books[region], start, end, region_zones)
    out = {}
    for scenario, vintage in vintages.items():
        hourly = {}
        for zone, region in zones:
            if zone not in historical:
                raise CoverageError(f"no historical hourly prices for zone {zone!r}")
            fc = forecasts.get((vintage, region), {})
            hourly[zone] = build_hourly_scenario(fc, historical[zone], zone, scenario, start, end, actuals_through)
        out[scenario] = MarketScenario(scenario, hourly, filled, rate, start, end)
    return out


def run_market(units: Sequence[GenerationUnit], historical, forecasts, books, rate: float = MONTHLY_WACC,
               **kwargs) -> MarketResult:
    fleet = tuple(analysis_fleet(units))
    scenarios = build_scenarios(fleet, historical, forecasts, books, rate, **kwargs)
    ledgers = {name: {u.unit_id: unit_profitability(u, sc) for u in fleet} for name, sc in scenarios.items()}
    report = classify_at_risk(fleet, ledgers["counterfactual"], ledgers["current_expectations"])
    return MarketResult(fleet, scenarios, ledgers, report)


# ---------------------------------------------------------------------------
# outputs


def _header(meta: Mapping | None) -> str:
    return "".join(f"# {k}={v}\n" for k, v in sorted((meta or {}).items()))


def ledgers_to_csv(result: MarketResult, meta: Mapping | None = None) -> str:
    buf = io.StringIO()
    buf.write(_header(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit_id", "scenario", "m", "month", "electricity_revenue", "capacity_revenue",
                "variable_cost", "fixed_cost", "net_cash_flow", "discounted_total"])
    for scenario, by_unit in result.ledgers.items():
        for uid in sorted(by_unit):
            led = by_unit[uid]
            for k, m in enumerate(led.months):
                w.writerow([uid, scenario, k + 1, str(m), repr(float(led.electricity_revenue[k])),
                            repr(float(led.capacity_revenue[k])), repr(float(led.variable_cost[k])),
                            repr(float(led.fixed_cost[k])), repr(float(led.net[k])), repr(led.discounted_total)])
    return buf.getvalue()


def monthly_aggregates_csv(report: AtRiskReport, meta: Mapping | None = None) -> str:
    buf = io.StringIO()
    buf.write(_header(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "month", "revenue", "cost", "profit"])
    for scenario, s in report.monthly.items():
        for k, m in enumerate(report.months):
            w.writerow([scenario, str(m), repr(s["revenue"][k]), repr(s["cost"][k]), repr(s["profit"][k])])
    return buf.getvalue()


def report_to_json(report: AtRiskReport, meta: Mapping | None = None) -> str:
    return json.dumps({"meta": dict(meta or {}), **report.to_dict()}, indent=1, sort_keys=True) + "\n"
