"""Deterministic synthetic inputs in the documented CSV layouts.

The real plant-level, price and cost data are either large agency downloads
or licensed; these generators produce stand-ins with the same structure so the
full pipeline can be exercised end to end.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .months import Month, month_range

HDD_CLIMATOLOGY = np.array([880, 720, 560, 330, 140, 25, 5, 10, 60, 280, 560, 800], dtype=float)
CDD_CLIMATOLOGY = np.array([10, 12, 30, 55, 130, 260, 370, 340, 200, 75, 18, 9], dtype=float)

# Mar-Dec 2020 shocks: generation multiplier and shift in coal's share of fossil output.
_E_SHOCK = [0.967, 0.912, 0.943, 0.976, 0.983, 0.973, 0.986, 0.962, 0.994, 1.016]
_COAL_SHIFT = [-0.01, -0.06, -0.06, -0.02, -0.01, 0.0, 0.0, 0.0, 0.0, 0.01]

_PLANTS = {
    # category: (count, fuel codes, heat-rate range MMBtu/MWh)
    "coal": (12, ("BIT", "SUB", "LIG"), (10.0, 10.9)),
    "gas": (15, ("NG",), (6.8, 8.6)),
    "oil": (4, ("DFO", "RFO"), (10.0, 12.0)),
    "nuclear": (4, ("NUC",), (10.3, 10.5)),
    "hydro": (4, ("WAT",), (0.0, 0.0)),
    "wind": (5, ("WND",), (0.0, 0.0)),
    "solar": (3, ("SUN",), (0.0, 0.0)),
}
_STATES = ["PA", "OH", "TX", "WV", "KY", "IN", "IL", "MO", "WY", "GA", "FL", "CA", "NY", "AZ", "WA", "MN"]

FACTORS = [
    ("BIT", 93.30, "EPA"), ("SUB", 97.17, "EPA"), ("LIG", 97.72, "EPA"),
    ("NG", 53.06, "EPA"), ("DFO", 73.96, "EPA"), ("RFO", 75.10, "EPA"),
]


def national_model(seed: int = 2006, start: str = "2016-01", end: str = "2020-12") -> dict[str, np.ndarray]:
    """Monthly national generation by category (MWh) and degree days."""
    rng = np.random.default_rng(seed)
    months = month_range(start, end)
    n = len(months)
    cal = np.array([m.month - 1 for m in months])
    hours = np.array([m.hours for m in months], dtype=float)
    t = np.arange(n) / 12.0

    hdd = np.clip(HDD_CLIMATOLOGY[cal] * (1 + 0.10 * rng.standard_normal(n)), 0, None)
    cdd = np.clip(CDD_CLIMATOLOGY[cal] * (1 + 0.10 * rng.standard_normal(n)), 0, None)
    load_gw = (440 + 0.055 * hdd + 0.33 * cdd - 0.8 * t) * (1 + 0.013 * rng.standard_normal(n))

    covid = np.array([Month(2020, 3) <= m <= Month(2020, 12) for m in months])
    shock_e = np.ones(n)
    shock_c = np.zeros(n)
    shock_e[covid] = _E_SHOCK
    shock_c[covid] = _COAL_SHIFT
    load_gw = load_gw * shock_e

    nuclear = np.full(n, 92.0) * (1 - 0.06 * np.isin(cal, [3, 4, 9, 10]))
    hydro = 30 + 8 * np.isin(cal, [3, 4, 5]) + 1.5 * rng.standard_normal(n)
    wind = (28 + 3.0 * t) * (1 + 0.25 * np.cos(2 * np.pi * (cal - 3) / 12)) * (1 + 0.05 * rng.standard_normal(n))
    solar = (6 + 2.2 * t) * (1 + 0.4 * np.sin(2 * np.pi * (cal - 2) / 12))
    oil = (1.6 + 0.0025 * hdd) * (1 + 0.08 * rng.standard_normal(n)) * np.where(covid, 1.10, 1.0)
    fossil = load_gw - nuclear - hydro - wind - solar - oil
    coal_frac = (0.48 - 0.045 * t + 0.035 * (np.isin(cal, [0, 1, 6, 7, 11]))
                 + 0.03 * rng.standard_normal(n) + shock_c)
    gw = {
        "coal": fossil * coal_frac,
        "gas": fossil * (1 - coal_frac),
        "oil": oil,
        "nuclear": nuclear,
        "hydro": hydro,
        "wind": wind,
        "solar": solar,
    }
    out = {k: v * hours * 1000.0 for k, v in gw.items()}  # GW x h -> MWh
    out["hdd"] = hdd
    out["cdd"] = cdd
    return out


def write_emissions_fixture(directory, seed: int = 2006, start: str = "2016-01", end: str = "2020-12") -> dict:
    """Write ``generation.csv``, ``factors.csv`` and ``degree_days.csv``; return their paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    months = month_range(start, end)
    nat = national_model(seed, start, end)
    rng = np.random.default_rng(seed + 1)

    rows = []
    for cat, (count, codes, (hr_lo, hr_hi)) in _PLANTS.items():
        weights = rng.dirichlet(np.full(count, 3.0))
        heat = rng.uniform(hr_lo, hr_hi, size=count)
        plants = [(f"{cat[:3].upper()}{k:03d}", _STATES[rng.integers(len(_STATES))], codes[k % len(codes)])
                  for k in range(count)]
        for i, m in enumerate(months):
            w = weights * (1 + 0.03 * rng.standard_normal(count))
            w = w / w.sum()
            gen = nat[cat][i] * w
            for (pid, state, code), g, hr in zip(plants, gen, heat):
                fuel = g * hr * (1 + 0.01 * rng.standard_normal())
                rows.append((pid, state, m.year, m.month, code, f"{g:.3f}", f"{max(fuel, 0.0):.1f}"))
    # a non-contiguous plant that the loader must drop
    for m in months:
        rows.append(("AK001", "AK", m.year, m.month, "NG", "150000.000", "1200000.0"))

    gen_path = d / "generation.csv"
    with gen_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["plant_id", "state", "year", "month", "fuel_code", "generation_mwh", "fuel_consumed_mmbtu"])
        w.writerows(rows)
    fac_path = d / "factors.csv"
    with fac_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fuel_code", "kg_co2_per_mmbtu", "provenance"])
        w.writerows(FACTORS)
    dd_path = d / "degree_days.csv"
    with dd_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "month", "hdd", "cdd"])
        for m, h, c in zip(months, nat["hdd"], nat["cdd"]):
            w.writerow([m.year, m.month, f"{h:.1f}", f"{c:.1f}"])
    return {"generation": gen_path, "factors": fac_path, "degree_days": dd_path}


# ---------------------------------------------------------------------------
# market fixture

MARKET_ZONES = {"AEP": "PJM", "MISO-6": "MISO", "SPP-S": "SPP"}

# unit_id, zone, MW, variable $/MWh, fixed $/MW-yr, in service, cogen
MARKET_UNITS = [
    ("U01", "AEP", 600.0, 15.0, 40000.0, "1971-05", False),   # profitable in both
    ("U02", "AEP", 150.0, 60.0, 60000.0, "1958-09", False),   # unprofitable in both, bid never clears
    ("U03", "AEP", 300.0, 27.0, 45000.0, "1966-02", False),   # capacity revenue keeps it whole
    ("U04", "MISO-6", 200.0, 17.0, 35000.0, "1978-07", False),
    ("U05", "MISO-6", 80.0, 55.0, 70000.0, "1954-07", False),
    ("U06", "MISO-6", 120.0, 19.0, 30000.0, "2020-09", False),  # enters service mid-window
    ("U07", "SPP-S", 45.0, 21.5, 36000.0, "1962-11", False),   # the engineered marginal unit
    ("U08", "SPP-S", 400.0, 14.0, 30000.0, "1983-03", False),
    ("U09", "SPP-S", 60.0, 48.0, 52000.0, "1960-01", False),
    ("U10", "SPP-S", 250.0, 16.0, 38000.0, "2021-06", False),
    ("U11", "AEP", 90.0, 18.0, 20000.0, "1990-01", True),      # cogeneration, excluded
]

# PJM annual periods starting 2015..2021 (last one ends May 2022); MISO 2016..2020.
PJM_ACTUALS = {"AEP": [136.0, 59.37, 120.0, 76.53, 100.0, 76.53, 140.0]}
MISO_ACTUALS = {"MISO-6": [72.0, 1.5, 10.0, 2.99, 5.0]}


def _zone_price_level(zone: str) -> float:
    return {"AEP": 31.0, "MISO-6": 28.0, "SPP-S": 25.0}[zone]


def _year_level(m: Month) -> float:
    if m.year == 2018:
        return 1.12
    if m.year == 2019:
        return 0.95
    if m < Month(2020, 3):
        return 0.85
    return 0.72  # depressed actuals Mar-Dec 2020


def _seasonal(month: int) -> float:
    # peaks in January and July
    return 1.0 + 0.12 * np.cos(2 * np.pi * (month - 1) / 6)


def historical_hourly(zone: str, seed: int = 7) -> dict[Month, np.ndarray]:
    rng = np.random.default_rng([seed, sum(map(ord, zone))])
    out = {}
    for m in month_range("2018-01", "2020-12"):
        h = np.arange(m.hours)
        base = _zone_price_level(zone) * _year_level(m) * _seasonal(m.month)
        daily = 0.35 * base * np.sin(2 * np.pi * ((h % 24) - 9) / 24)
        noise = base * 0.18 * rng.standard_normal(m.hours)
        out[m] = np.round(base + daily + noise, 2)
    return out


def regional_forecasts() -> dict[tuple[str, str], dict[Month, float]]:
    out = {}
    for region in sorted(set(MARKET_ZONES.values())):
        zone = next(z for z, r in MARKET_ZONES.items() if r == region)
        lvl = _zone_price_level(zone)
        growth = {2020: 1.0, 2021: 1.03, 2022: 1.07}
        out[("2020-01", region)] = {m: round(lvl * growth[m.year] * _seasonal(m.month), 2)
                                    for m in month_range("2020-03", "2022-12")}
        out[("2021-01", region)] = {m: round(lvl * 0.86 * _seasonal(m.month), 2)
                                    for m in month_range("2021-01", "2022-12")}
    return out


def write_market_fixture(directory, seed: int = 7) -> dict:
    d = Path(directory)
    (d / "hourly").mkdir(parents=True, exist_ok=True)
    units_path = d / "units.csv"
    with units_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit_id", "region", "zone", "capacity_mw", "variable_cost_usd_per_mwh",
                    "fixed_om_usd_per_mw_year", "in_service", "cogen"])
        for uid, zone, mw, vc, fom, ins, cogen in MARKET_UNITS:
            w.writerow([uid, MARKET_ZONES[zone], zone, mw, vc, fom, ins, str(cogen).lower()])

    hourly_paths = {}
    for zone in MARKET_ZONES:
        p = d / "hourly" / f"{zone}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", "price_usd_per_mwh"])
            for m, prices in historical_hourly(zone, seed).items():
                t0 = np.datetime64(f"{m}-01T00", "h")
                for k, price in enumerate(prices):
                    w.writerow([str(t0 + k) + ":00", f"{price:.2f}"])
        hourly_paths[zone] = p

    fc_path = d / "forecasts.csv"
    with fc_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "year", "month", "price_usd_per_mwh", "vintage"])
        for (vintage, region), by_month in regional_forecasts().items():
            for m, p in by_month.items():
                w.writerow([region, m.year, m.month, f"{p:.2f}", vintage])

    cap_path = d / "capacity_prices.csv"
    with cap_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "zone", "cp_start", "cp_end", "clearing_usd_per_mw_day", "provenance"])
        for region, table, first in (("PJM", PJM_ACTUALS, 2015), ("MISO", MISO_ACTUALS, 2016)):
            for zone, prices in table.items():
                for k, g in enumerate(prices):
                    y = first + k
                    w.writerow([region, zone, f"{y}-06-01", f"{y + 1}-05-31", g, "actual"])
    return {"units": units_path, "hourly_prices": hourly_paths, "forecasts": fc_path,
            "capacity_prices": cap_path}


def write_config(directory, seed: int = 0) -> Path:
    """Write both fixtures plus a ``config.json`` wiring them together."""
    d = Path(directory)
    em = write_emissions_fixture(d / "emissions")
    mk = write_market_fixture(d / "market")
    cfg = {
        "seed": seed,
        "output_dir": "out",
        "ingest": {
            "generation": str(em["generation"].relative_to(d)),
            "factors": str(em["factors"].relative_to(d)),
            "degree_days": str(em["degree_days"].relative_to(d)),
            "window": ["2016-01", "2020-12"],
        },
        "counterfactual": {
            "targets": ["C", "E", "C_over_E"],
            "fuel_targets": ["C_coal", "C_gas", "C_oil"],
            "train": ["2016-01", "2020-02"],
            "forecast": ["2020-03", "2020-12"],
            "n_restarts": 5,
        },
        "market": {
            "units": str(mk["units"].relative_to(d)),
            "hourly_prices": {z: str(p.relative_to(d)) for z, p in mk["hourly_prices"].items()},
            "forecasts": str(mk["forecasts"].relative_to(d)),
            "capacity_prices": str(mk["capacity_prices"].relative_to(d)),
            "monthly_rate": 0.0038,
        },
    }
    path = d / "config.json"
    path.write_text(json.dumps(cfg, indent=2) + "\n")
    return path
