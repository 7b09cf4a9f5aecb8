from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"
GOLDEN = DATA / "golden"


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture(scope="session")
def golden_bundle():
    from cfpower.ingest import run_ingest

    bundle, _ = run_ingest(GOLDEN / "generation.csv", GOLDEN / "factors.csv", GOLDEN / "degree_days.csv",
                           ("2016-01", "2020-12"))
    return bundle


@pytest.fixture(scope="session")
def market_dir(tmp_path_factory) -> Path:
    from cfpower.synthetic import write_market_fixture

    d = tmp_path_factory.mktemp("market")
    write_market_fixture(d)
    return d


@pytest.fixture(scope="session")
def market_inputs(market_dir):
    from cfpower.market import load_capacity_prices, load_hourly_prices, load_monthly_forecasts, load_units

    units = load_units(market_dir / "units.csv")
    historical = {p.stem: load_hourly_prices(p) for p in sorted((market_dir / "hourly").glob("*.csv"))}
    forecasts = load_monthly_forecasts(market_dir / "forecasts.csv")
    books = load_capacity_prices(market_dir / "capacity_prices.csv")
    return units, historical, forecasts, books


@pytest.fixture(scope="session")
def market_result(market_inputs):
    from cfpower.market import run_market

    return run_market(*market_inputs)


@pytest.fixture(scope="session")
def market_oracle(market_dir):
    import oracles

    return oracles.market_ledgers(**oracles.fixture_paths(market_dir))
