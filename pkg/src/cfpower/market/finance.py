"""Monthly cash flows, capacity bids and discounted profitability per unit."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import CoverageError, DomainError
from ..months import Month, month_range
from .capacity import CAPACITY_REGIONS, CapacityAuctionBook, CommitmentPeriod, commitment_periods
from .dispatch import DispatchResult, monthly_dispatch
from .prices import ANALYSIS_END, ANALYSIS_START, HourlyPriceSeries
from .units import GenerationUnit

ANNUAL_WACC = 0.0461
MONTHLY_WACC = 0.0038


def monthly_rate(annual: float) -> float:
    return (1.0 + annual) ** (1.0 / 12.0) - 1.0


def discount_factors(n: int, rate: float) -> np.ndarray:
    """``1 / (1 + r)^m`` for m = 1..n."""
    return 1.0 / (1.0 + rate) ** np.arange(1, n + 1)


def npv(cash_flows: Sequence[float], rate: float) -> float:
    """Sum of L_m / (1 + r)^m with the first cash flow at m = 1."""
    cf = np.asarray(cash_flows, dtype=float)
    return float(np.sum(cf * discount_factors(cf.shape[0], rate)))


@dataclass(frozen=True, eq=False)
class MarketScenario:
    """Everything needed to value units under one price scenario."""

    name: str
    hourly: Mapping[str, HourlyPriceSeries]
    books: Mapping[str, CapacityAuctionBook] = field(default_factory=dict)
    rate: float = MONTHLY_WACC
    start: Month = ANALYSIS_START
    end: Month = ANALYSIS_END

    @property
    def months(self) -> list[Month]:
        return month_range(self.start, self.end)

    def discount(self, m: Month) -> float:
        k = m - self.start + 1
        return 1.0 / (1.0 + self.rate) ** k

    def zone_prices(self, zone: str) -> HourlyPriceSeries:
        try:
            return self.hourly[zone]
        except KeyError:
            raise CoverageError(f"scenario {self.name!r} has no hourly prices for zone {zone!r}") from None

    def book(self, region: str) -> CapacityAuctionBook:
        try:
            return self.books[region]
        except KeyError:
            raise CoverageError(f"scenario {self.name!r} has no capacity prices for {region}") from None


@dataclass(frozen=True, eq=False)
class CashFlowLedger:
    unit_id: str
    scenario: str
    months: tuple[Month, ...]
    electricity_revenue: np.ndarray
    capacity_revenue: np.ndarray
    variable_cost: np.ndarray
    fixed_cost: np.ndarray
    rate: float
    bids: Mapping[CommitmentPeriod, float] = field(default_factory=dict)
    net: np.ndarray = field(init=False)
    discounted_total: float = field(init=False)

    def __post_init__(self) -> None:
        # evaluated left to right so that E + C - V - F - L is exactly zero
        net = self.electricity_revenue + self.capacity_revenue - self.variable_cost - self.fixed_cost
        object.__setattr__(self, "net", net)
        object.__setattr__(self, "discounted_total", npv(net, self.rate))

    @property
    def revenue(self) -> np.ndarray:
        return self.electricity_revenue + self.capacity_revenue

    @property
    def cost(self) -> np.ndarray:
        return self.variable_cost + self.fixed_cost


def fixed_cost(unit: GenerationUnit, m: Month) -> float:
    if not unit.in_service_during(m):
        return 0.0
    return unit.fixed_om_per_mw_year * unit.capacity_mw / 12.0


def _dispatch_all(unit: GenerationUnit, scenario: MarketScenario, months) -> dict[Month, DispatchResult]:
    series = scenario.zone_prices(unit.zone)
    out = {}
    for m in months:
        if unit.in_service_during(m):
            out[m] = monthly_dispatch(unit, series.month_prices(m))
        else:
            out[m] = DispatchResult(0.0, 0.0, 0)
    return out


def _covered_months(cp: CommitmentPeriod, scenario: MarketScenario) -> list[Month]:
    months = [m for m in cp.months if scenario.start <= m <= scenario.end]
    if not months:
        raise CoverageError(f"commitment period {cp.label()} lies outside {scenario.start}..{scenario.end}")
    return months


def _bid(unit: GenerationUnit, months: list[Month], dispatch: Mapping[Month, DispatchResult],
         scenario: MarketScenario) -> float:
    pv_e = pv_v = pv_f = pv_stream = 0.0
    for m in months:
        df = scenario.discount(m)
        d = dispatch[m]
        pv_e += d.electricity_revenue * df
        pv_v += d.variable_cost * df
        pv_f += fixed_cost(unit, m) * df
        if unit.in_service_during(m):
            pv_stream += unit.capacity_mw * m.days * df
    shortfall = pv_v + pv_f - pv_e
    if shortfall <= 0:
        return 0.0
    return shortfall / pv_stream


def capacity_bid(unit: GenerationUnit, cp: CommitmentPeriod, scenario: MarketScenario) -> float:
    """Capacity offer in $/MW-day.

    Zero when the unit expects energy revenue to cover variable and fixed
    costs over the period (present values). Otherwise the constant $/MW-day
    payment whose present value equals the shortfall. Only months of ``cp``
    inside the scenario window are valued.
    """
    if unit.region not in CAPACITY_REGIONS:
        raise DomainError(f"{unit.unit_id}: {unit.region} has no capacity market")
    months = _covered_months(cp, scenario)
    return _bid(unit, months, _dispatch_all(unit, scenario, months), scenario)


def capacity_revenue(unit: GenerationUnit, cp: CommitmentPeriod, book: CapacityAuctionBook, bid: float,
                     start: Month = ANALYSIS_START, end: Month = ANALYSIS_END) -> dict[Month, float]:
    """Clearing price x capacity x days in month, for each month of ``cp`` in ``start..end``.

    Zero throughout when the bid exceeds the zonal clearing price.
    """
    g = book.price(unit.zone, cp).clearing_usd_per_mw_day
    cleared = bid <= g
    out = {}
    for m in cp.months:
        if start <= m <= end:
            out[m] = g * unit.capacity_mw * m.days if cleared and unit.in_service_during(m) else 0.0
    return out


def unit_profitability(unit: GenerationUnit, scenario: MarketScenario) -> CashFlowLedger:
    months = scenario.months
    dispatch = _dispatch_all(unit, scenario, months)
    idx = {m: i for i, m in enumerate(months)}
    E = np.array([dispatch[m].electricity_revenue for m in months])
    V = np.array([dispatch[m].variable_cost for m in months])
    F = np.array([fixed_cost(unit, m) for m in months])
    C = np.zeros(len(months))
    bids = {}
    if unit.region in CAPACITY_REGIONS:
        book = scenario.book(unit.region)
        for cp in commitment_periods(unit.region, scenario.start, scenario.end):
            bid = _bid(unit, _covered_months(cp, scenario), dispatch, scenario)
            bids[cp] = bid
            for m, rev in capacity_revenue(unit, cp, book, bid, scenario.start, scenario.end).items():
                C[idx[m]] = rev
    return CashFlowLedger(unit.unit_id, scenario.name, tuple(months), E, C, V, F, scenario.rate, bids)
