import csv
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from cfpower.counterfactual import (ExperimentSpec, calibration_trials, deviation_report, design_matrix,
                                    fuel_split_experiment, fuel_split_table, plot_data_csv, reports_to_csv,
                                    reports_to_json, run_experiment, significance_verdict)
from cfpower.errors import CoverageError, DegenerateTargetError, SchemaError
from cfpower.gp import FitConfig, PredictiveDistribution
from cfpower.ingest import MonthlySeries
from cfpower.months import Month


def dist(mean, var):
    mean, var = np.asarray(mean, float), np.asarray(var, float)
    return PredictiveDistribution(list(range(mean.shape[0])), mean, var, var)


@pytest.mark.parametrize("offset,expected", [(0.0, False), (2.0, True), (-2.0, True), (1.95, False),
                                             (-1.95, False)])
def test_verdict_examples(offset, expected):
    d = dist([100.0], [4.0])
    assert significance_verdict(d, [100.0 + offset * 2.0])[0] == expected


@given(hnp.arrays(float, 10, elements=st.floats(1, 1e4)), hnp.arrays(float, 10, elements=st.floats(1e-4, 1e4)),
       hnp.arrays(float, 10, elements=st.floats(-5, 5)))
def test_verdict_agrees_with_z_score(mean, var, z_raw):
    obs = mean + z_raw * np.sqrt(var)
    d = dist(mean, var)
    z = (obs - mean) / np.sqrt(var)
    # rounding can move a point sitting on the boundary either way; judge the rest exactly
    clear = np.abs(np.abs(z) - 1.96) > 1e-9
    verdict = significance_verdict(d, obs)
    assert np.array_equal(verdict[clear], (np.abs(z) > 1.96)[clear])
    rep = deviation_report("X", d, obs)
    pct_rule = np.array([abs(r.percent_deviation) > r.ci_halfwidth_pct for r in rep.rows])
    assert np.array_equal(pct_rule[clear], verdict[clear])


def test_report_fields_and_average():
    d = PredictiveDistribution([Month(2020, 3), Month(2020, 4)], np.array([100.0, 200.0]), np.array([25.0, 4.0]),
                               np.array([20.0, 3.0]))
    rep = deviation_report("C", d, [90.0, 210.0])
    assert [r.percent_deviation for r in rep.rows] == pytest.approx([-10.0, 5.0], rel=1e-14)
    assert rep.rows[0].ci_halfwidth_pct == pytest.approx(100 * 1.96 * 5 / 100)
    assert rep.average_percent_deviation == pytest.approx(-2.5, abs=1e-12)
    assert rep.significant_months == [Month(2020, 3), Month(2020, 4)]
    assert rep.observed_average == 150.0 and rep.counterfactual_average == 150.0


def test_experiment_windows_are_validated():
    spec = ExperimentSpec("C")
    assert spec.train == (Month(2016, 1), Month(2020, 2))
    assert spec.forecast == (Month(2020, 3), Month(2020, 12))
    assert len(spec.train_months) == 50 and len(spec.forecast_months) == 10
    with pytest.raises(SchemaError):
        ExperimentSpec("C", train=("2016-01", "2020-03"), forecast=("2020-03", "2020-12"))


@pytest.fixture(scope="module")
def golden_c(golden_bundle):
    spec = ExperimentSpec("C")
    return spec, run_experiment(golden_bundle, spec)


def test_forecast_uses_observed_weather(golden_bundle):
    spec = ExperimentSpec("C")
    X = design_matrix(golden_bundle, spec.forecast_months, spec.covariates)
    assert np.array_equal(X[:, 1], golden_bundle["HDD"].window(*spec.forecast))
    assert np.array_equal(X[:, 2], golden_bundle["CDD"].window(*spec.forecast))


def test_report_covers_every_forecast_month(golden_c):
    spec, res = golden_c
    assert [r.month for r in res.report.rows] == spec.forecast_months
    devs = [r.percent_deviation for r in res.report.rows]
    assert abs(res.report.average_percent_deviation - float(np.mean(devs))) <= 1e-12


def test_rerun_is_identical(golden_bundle, golden_c):
    _, res = golden_c
    again = run_experiment(golden_bundle, ExperimentSpec("C"))
    assert again.report.to_dict() == res.report.to_dict()


def test_all_zero_fuel_series_is_refused(golden_bundle):
    bundle = dict(golden_bundle)
    months = golden_bundle["C"].months
    bundle["C_oil"] = MonthlySeries("C_oil", months, np.zeros(len(months)))
    with pytest.raises(DegenerateTargetError):
        fuel_split_experiment(bundle)


def test_missing_label_and_short_series(golden_bundle):
    with pytest.raises(SchemaError):
        run_experiment(golden_bundle, ExperimentSpec("C_nuclear"))
    from cfpower.counterfactual import check_covers

    with pytest.raises(CoverageError):
        check_covers(golden_bundle, ExperimentSpec("C", train=("2015-01", "2020-02")))


def test_observed_equal_to_forecast_means_is_never_significant(golden_bundle, golden_c):
    _, res = golden_c
    bundle = dict(golden_bundle)
    c = golden_bundle["C"]
    values = c.values.copy()
    values[-10:] = res.forecast.mean
    bundle["C"] = MonthlySeries("C", c.months, values, c.units)
    rerun = run_experiment(bundle, ExperimentSpec("C"))
    assert rerun.report.significant_months == []


def test_fuel_split_table_layout(golden_bundle):
    results = fuel_split_experiment(golden_bundle, ExperimentSpec("C", fit_config=FitConfig(n_restarts=2)))
    rows = fuel_split_table(results)
    assert [r["target"] for r in rows] == ["C_coal", "C_gas", "C_oil"]
    for r in rows:
        rep = results[r["target"]].report
        assert r["average_percent_deviation"] == rep.average_percent_deviation
        assert r["observed_average"] == pytest.approx(np.mean([x.observed for x in rep.rows]))


def test_outputs_carry_metadata_and_all_rows(golden_bundle, golden_c):
    spec, res = golden_c
    meta = {"config_sha256": "abc", "seed": 0}
    text = reports_to_csv([res.report], meta)
    assert text.startswith("# config_sha256=abc\n# seed=0\n")
    body = list(csv.DictReader(io.StringIO("".join(l + "\n" for l in text.splitlines() if not l.startswith("#")))))
    assert len(body) == 11 and body[-1]["month"] == "average"
    assert '"config_sha256": "abc"' in reports_to_json([res.report], meta)
    plot = plot_data_csv(res, golden_bundle, spec, meta).splitlines()
    assert sum(1 for l in plot if ",train," in l) == 50
    assert sum(1 for l in plot if ",forecast," in l) == 10


def test_prior_simulation_rarely_flags_more_than_two_months(golden_bundle, golden_c):
    spec, res = golden_c
    X_train = design_matrix(golden_bundle, spec.train_months, spec.covariates)
    X_fc = design_matrix(golden_bundle, spec.forecast_months, spec.covariates)
    flags = calibration_trials(res.model, X_train, X_fc, n_trials=100, seed=20200301)
    per_trial = flags.sum(axis=1)
    assert np.mean(per_trial <= 2) >= 0.90
