import csv
import io
import json

import pytest

import oracles
from cfpower.errors import CoverageError, SchemaError
from cfpower.market import classify_at_risk, run_market
from cfpower.market.fleet import ledgers_to_csv, monthly_aggregates_csv, report_to_json
from cfpower.months import Month

# Units the fixture was built around: U07 clears its costs only at pre-pandemic prices.
HAND_CLASSIFIED = {"U07"}


def test_ledgers_match_spreadsheet_replica(market_result, market_oracle):
    worst = 0.0
    for scenario, by_unit in market_oracle.items():
        for uid, ref in by_unit.items():
            led = market_result.ledgers[scenario][uid]
            for k, (e, c, v, f, l) in enumerate(ref["lines"]):
                got = (led.electricity_revenue[k], led.capacity_revenue[k], led.variable_cost[k],
                       led.fixed_cost[k], led.net[k])
                worst = max(worst, *(abs(a - b) for a, b in zip(got, (e, c, v, f, l))))
            worst = max(worst, abs(led.discounted_total - ref["P"]))
    assert worst <= 1.0


def test_at_risk_set(market_result, market_oracle):
    assert set(market_result.report.at_risk) == HAND_CLASSIFIED
    assert oracles.at_risk(market_oracle) == HAND_CLASSIFIED


def test_fixture_shape(market_result, market_inputs):
    units = market_inputs[0]
    assert len(units) == 11 and [u.unit_id for u in units if u.cogeneration] == ["U11"]
    assert len(market_result.fleet) == 10
    assert len({u.zone for u in market_result.fleet}) >= 3
    assert all(len(l.months) == 34 for by in market_result.ledgers.values() for l in by.values())


def test_report_aggregates(market_result):
    rep = market_result.report
    fleet_mw = sum(u.capacity_mw for u in market_result.fleet)
    u07 = next(u for u in market_result.fleet if u.unit_id == "U07")
    assert rep.count == 1 and rep.total_mw == u07.capacity_mw
    assert rep.share_of_fleet_mw == pytest.approx(u07.capacity_mw / fleet_mw)
    assert rep.mean_age_years == pytest.approx(u07.age_years(Month(2020, 3)))
    assert rep.zone_counts == {u07.zone: 1} and rep.region_counts == {"SPP": 1}
    pv = {k: sum(l.discounted_total for l in by.values()) for k, by in market_result.ledgers.items()}
    assert rep.pv_profit_delta == pytest.approx(pv["counterfactual"] - pv["current_expectations"], rel=1e-9)
    assert rep.pv_profit_delta > 0


def test_identical_scenarios_put_nobody_at_risk(market_inputs):
    res = run_market(*market_inputs, actuals_through=Month(2020, 2),
                     vintages={"counterfactual": "2020-01", "current_expectations": "2020-01"})
    assert res.report.at_risk == () and res.report.pv_profit_delta == 0.0


def test_classification_rule_on_hand_built_totals(market_result):
    cf = market_result.ledgers["counterfactual"]
    cur = market_result.ledgers["current_expectations"]
    rep = classify_at_risk(market_result.fleet, cf, cur)
    for u in market_result.fleet:
        expected = cf[u.unit_id].discounted_total >= 0 > cur[u.unit_id].discounted_total
        assert (u.unit_id in rep.at_risk) == expected
    with pytest.raises(SchemaError):
        classify_at_risk(market_result.fleet, cf, {k: v for k, v in cur.items() if k != "U01"})


def test_missing_zone_or_book_is_a_coverage_gap(market_inputs):
    units, historical, forecasts, books = market_inputs
    with pytest.raises(CoverageError):
        run_market(units, {k: v for k, v in historical.items() if k != "AEP"}, forecasts, books)
    with pytest.raises(CoverageError):
        run_market(units, historical, forecasts, {k: v for k, v in books.items() if k != "PJM"})


def test_outputs_carry_metadata(market_result):
    meta = {"config_sha256": "f00", "seed": 7}
    text = ledgers_to_csv(market_result, meta)
    assert text.startswith("# config_sha256=f00\n# seed=7\n")
    rows = list(csv.DictReader(io.StringIO("\n".join(l for l in text.splitlines() if not l.startswith("#")))))
    assert len(rows) == 2 * 10 * 34
    doc = json.loads(report_to_json(market_result.report, meta))
    assert doc["meta"] == meta and doc["at_risk"] == ["U07"]
    agg = monthly_aggregates_csv(market_result.report, meta).splitlines()
    assert agg[0] == "# config_sha256=f00" and len(agg) == 2 + 1 + 2 * 34
