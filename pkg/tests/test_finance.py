import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfpower.errors import DomainError
from cfpower.market import (ANNUAL_WACC, MONTHLY_WACC, CapacityAuctionBook, CapacityPrice, CommitmentPeriod,
                            GenerationUnit, HourlyPriceSeries, MarketScenario, capacity_bid, capacity_revenue,
                            monthly_rate, npv, unit_profitability)
from cfpower.market.finance import fixed_cost
from cfpower.months import Month, month_range

CP_2021 = CommitmentPeriod(Month(2021, 6), Month(2022, 5), "annual")


def flat_scenario(level, start="2021-06", end="2022-05", rate=0.0, zone="Z", books=None):
    months = month_range(start, end)
    hourly = {zone: HourlyPriceSeries(zone, "test", {m: np.full(m.hours, float(level)) for m in months})}
    return MarketScenario("test", hourly, books or {}, rate, Month.parse(start), Month.parse(end))


def pjm_book(g, zone="Z"):
    book = CapacityAuctionBook("PJM")
    book.add(CapacityPrice(zone, CP_2021, g))
    return book


def test_capacity_revenue_example():
    u = GenerationUnit("U", "PJM", "Z", 50.0, 20.0, 0.0, "2000-01")
    rev = capacity_revenue(u, CP_2021, pjm_book(100.0), bid=80.0, start=Month(2021, 6), end=Month(2021, 6))
    assert rev == {Month(2021, 6): 150_000.0}
    assert capacity_revenue(u, CP_2021, pjm_book(100.0), bid=100.01, start=Month(2021, 6),
                            end=Month(2021, 6)) == {Month(2021, 6): 0.0}


def test_capacity_revenue_follows_month_length():
    u = GenerationUnit("U", "PJM", "Z", 1.0, 20.0, 0.0, "2000-01")
    rev = capacity_revenue(u, CP_2021, pjm_book(10.0), 0.0, Month(2021, 6), Month(2022, 5))
    assert rev[Month(2021, 6)] == 300.0 and rev[Month(2021, 7)] == 310.0 and rev[Month(2022, 2)] == 280.0
    assert sum(rev.values()) == 3650.0


def test_bid_recovers_shortfall_without_discounting():
    # no energy revenue, $36,500 of fixed cost over a 365-day period, 1 MW
    u = GenerationUnit("U", "PJM", "Z", 1.0, 10.0, 36_500.0, "2000-01")
    sc = flat_scenario(0.0)
    assert CP_2021.days == 365
    assert capacity_bid(u, CP_2021, sc) == pytest.approx(100.0, rel=1e-12)


def test_profitable_unit_bids_zero():
    u = GenerationUnit("U", "PJM", "Z", 100.0, 10.0, 1000.0, "2000-01")
    assert capacity_bid(u, CP_2021, flat_scenario(40.0, rate=MONTHLY_WACC)) == 0.0


def test_energy_only_region_has_no_bid():
    u = GenerationUnit("U", "SPP", "Z", 100.0, 10.0, 1000.0, "2000-01")
    with pytest.raises(DomainError):
        capacity_bid(u, CP_2021, flat_scenario(40.0))


@given(st.floats(5, 60), st.floats(20_000, 120_000), st.floats(0, 0.01))
def test_bid_present_value_matches_shortfall(level, fom, rate):
    u = GenerationUnit("U", "PJM", "Z", 200.0, 30.0, fom, "2000-01")
    sc = flat_scenario(level, rate=rate)
    bid = capacity_bid(u, CP_2021, sc)
    months = CP_2021.months
    energy = [max(level - 30.0, 0.0) * m.hours * 200.0 if level >= 30.0 else 0.0 for m in months]
    short = sum((fom * 200.0 / 12 - e) * sc.discount(m) for m, e in zip(months, energy))
    if short <= 0:
        assert bid == 0.0
    else:
        awarded = sum(bid * 200.0 * m.days * sc.discount(m) for m in months)
        assert awarded == pytest.approx(short, rel=1e-6)


def test_npv_examples():
    assert npv([1000.0], 0.0) == 1000.0
    assert npv([1.0, 2.0, 3.0], 0.0) == 6.0
    assert npv([1000.0], 0.01) == pytest.approx(1000.0 / 1.01)
    flows = np.random.default_rng(3).normal(0, 1e6, 34)
    assert npv(flows, 0.0) == pytest.approx(math.fsum(flows), abs=1e-6)


def test_monthly_wacc_is_consistent_with_annual():
    assert abs((1 + MONTHLY_WACC) ** 12 - 1 - ANNUAL_WACC) < 0.001
    assert round(monthly_rate(ANNUAL_WACC), 4) == MONTHLY_WACC


def test_zero_prices_lose_exactly_the_fixed_cost():
    u = GenerationUnit("U", "SPP", "Z", 80.0, 15.0, 24_000.0, "2000-01")
    sc = flat_scenario(0.0, start="2020-03", end="2022-12", rate=MONTHLY_WACC)
    led = unit_profitability(u, sc)
    assert not led.electricity_revenue.any() and not led.variable_cost.any()
    pv_fixed = sum(fixed_cost(u, m) * sc.discount(m) for m in sc.months)
    assert led.discounted_total == pytest.approx(-pv_fixed, rel=1e-12)


def test_unit_entering_mid_window_has_empty_early_months():
    u = GenerationUnit("U", "SPP", "Z", 80.0, 15.0, 24_000.0, "2021-07")
    sc = flat_scenario(50.0, start="2020-03", end="2022-12", rate=MONTHLY_WACC)
    led = unit_profitability(u, sc)
    k = sc.months.index(Month(2021, 7))
    for line in (led.electricity_revenue, led.variable_cost, led.fixed_cost, led.net):
        assert not line[:k].any() and line[k:].all()


def test_ledger_identity_is_exact(market_result):
    for by_unit in market_result.ledgers.values():
        for led in by_unit.values():
            resid = led.electricity_revenue + led.capacity_revenue - led.variable_cost - led.fixed_cost - led.net
            assert not resid.any()
            pv = math.fsum(led.net[k] / (1 + led.rate) ** (k + 1) for k in range(len(led.months)))
            assert abs(pv - led.discounted_total) <= 1e-9 * max(1.0, abs(pv))


def test_energy_only_units_never_earn_capacity(market_result):
    for by_unit in market_result.ledgers.values():
        for u in market_result.fleet:
            if u.region in ("SPP", "ERCOT"):
                assert not by_unit[u.unit_id].capacity_revenue.any()


def test_awarded_units_recover_costs(market_result):
    """A unit paid its own bid over a period should end that period at break-even or better."""
    for name, scenario in market_result.scenarios.items():
        for u in market_result.fleet:
            led = market_result.ledgers[name][u.unit_id]
            for cp, bid in led.bids.items():
                months = [m for m in cp.months if scenario.start <= m <= scenario.end]
                idx = [led.months.index(m) for m in months]
                pv = sum((led.electricity_revenue[i] - led.variable_cost[i] - led.fixed_cost[i]
                          + (bid * u.capacity_mw * m.days if u.in_service_during(m) else 0.0))
                         * scenario.discount(m) for i, m in zip(idx, months))
                assert pv >= -1.0
