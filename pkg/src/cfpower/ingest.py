"""Plant-level generation/fuel data -> national monthly series.

Input layouts (CSV, header row required):

* generation: ``plant_id, state, year, month, fuel_code, generation_mwh, fuel_consumed_mmbtu``
* emission factors: ``fuel_code, kg_co2_per_mmbtu`` and optionally ``category``, ``provenance``
* degree days: ``year, month, hdd, cdd``

Real agency downloads can be adapted with a ``column_map`` that maps the
canonical column names above onto the names used in the file.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import CoverageError, SchemaError
from .months import Month, annualization_factor, month_range

log = logging.getLogger(__name__)

GENERATION_COLUMNS = ("plant_id", "state", "year", "month", "fuel_code", "generation_mwh", "fuel_consumed_mmbtu")
FACTOR_COLUMNS = ("fuel_code", "kg_co2_per_mmbtu")
DEGREE_DAY_COLUMNS = ("year", "month", "hdd", "cdd")

# 48 contiguous states + DC
CONTIGUOUS_STATES = frozenset("""
AL AZ AR CA CO CT DE DC FL GA ID IL IN IA KS KY LA ME MD MA MI MN MS MO MT NE NV NH NJ NM NY
NC ND OH OK OR PA RI SC SD TN TX UT VT VA WA WV WI WY
""".split())

COAL_CODES = frozenset({"ANT", "BIT", "LIG", "SUB", "WC", "RC", "SC", "SGC"})
GAS_CODES = frozenset({"NG", "BFG", "OG", "PG"})
OIL_CODES = frozenset({"DFO", "JF", "KER", "RFO", "WO", "PC", "SGP"})
ZERO_EMISSION_CODES = frozenset({
    "NUC", "WAT", "SUN", "WND", "GEO", "MWH", "WH", "PUR",
    "WDS", "WDL", "BLQ", "AB", "OBS", "OBL", "SLW", "LFG", "OBG", "MSB",
})
FUEL_CATEGORIES = ("coal", "gas", "oil", "other")

UNITS = {
    "C": "MMT CO2 (annualized)",
    "E": "TWh (annualized)",
    "C_over_E": "kg CO2/MWh",
    "HDD": "degree days",
    "CDD": "degree days",
}


def default_category(fuel_code: str) -> str:
    if fuel_code in COAL_CODES:
        return "coal"
    if fuel_code in GAS_CODES:
        return "gas"
    if fuel_code in OIL_CODES:
        return "oil"
    if fuel_code in ZERO_EMISSION_CODES:
        return "zero"
    return "other"


@dataclass(frozen=True)
class PlantFuelMonth:
    plant_id: str
    fuel_code: str
    month: Month
    generation_mwh: float
    fuel_consumed_mmbtu: float
    negative_generation: bool = False


@dataclass
class IngestReport:
    warnings: list[str] = field(default_factory=list)
    unknown_codes: dict[str, int] = field(default_factory=dict)
    negative_generation_rows: int = 0
    dropped_state_rows: int = 0
    dropped_window_rows: int = 0

    @property
    def warning_count(self) -> int:
        return len(self.warnings)

    def as_dict(self) -> dict:
        return {
            "warnings": list(self.warnings),
            "unknown_codes": dict(sorted(self.unknown_codes.items())),
            "negative_generation_rows": self.negative_generation_rows,
            "dropped_state_rows": self.dropped_state_rows,
            "dropped_window_rows": self.dropped_window_rows,
        }


@dataclass(frozen=True)
class EmissionFactorTable:
    factors: Mapping[str, float]
    categories: Mapping[str, str]
    provenance: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for code, f in self.factors.items():
            if not (math.isfinite(f) and f >= 0):
                raise SchemaError(f"emission factor for {code} must be finite and >= 0, got {f}")

    def category(self, code: str) -> str:
        return self.categories.get(code) or default_category(code)

    def known_codes(self) -> frozenset[str]:
        return frozenset(self.factors) | ZERO_EMISSION_CODES


@dataclass(frozen=True, eq=False)
class MonthlySeries:
    label: str
    months: tuple[Month, ...]
    values: np.ndarray
    units: str = ""

    def __post_init__(self) -> None:
        months = tuple(Month.parse(m) for m in self.months)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(months),):
            raise SchemaError(f"{self.label}: {len(months)} months but values shape {values.shape}")
        for a, b in zip(months, months[1:]):
            if b.ordinal != a.ordinal + 1:
                raise CoverageError(f"{self.label}: months not contiguous between {a} and {b}")
        if not np.all(np.isfinite(values)):
            raise SchemaError(f"{self.label}: non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "months", months)
        object.__setattr__(self, "values", values)

    def window(self, start: Month | str, end: Month | str) -> np.ndarray:
        start, end = Month.parse(start), Month.parse(end)
        if not self.months or start < self.months[0] or end > self.months[-1]:
            raise CoverageError(f"{self.label} covers {self.months[0]}..{self.months[-1]}, not {start}..{end}")
        i = start - self.months[0]
        return self.values[i:i + (end - start) + 1]


# ---------------------------------------------------------------------------
# parsing


def _open_rows(path, required: Iterable[str], column_map: Mapping[str, str] | None):
    """Yield ``(line_number, row)`` with required columns under their canonical names."""
    column_map = dict(column_map or {})
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if column_map.get(col, col) not in header:
                raise SchemaError(f"{path.name}: missing required column {column_map.get(col, col)!r}")
        for row in reader:
            for col in required:
                row[col] = row[column_map.get(col, col)]
            yield reader.line_num, row


def _number(raw, col: str, line: int, path) -> float:
    try:
        val = float(str(raw).replace(",", "").strip())
    except (TypeError, ValueError):
        raise SchemaError(f"{Path(path).name}:{line}: cannot parse {col}={raw!r}") from None
    if not math.isfinite(val):
        raise SchemaError(f"{Path(path).name}:{line}: non-finite {col}={raw!r}")
    return val


def _month(row, line: int, path) -> Month:
    try:
        return Month(int(_number(row["year"], "year", line, path)), int(_number(row["month"], "month", line, path)))
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"{Path(path).name}:{line}: {exc}") from None


def load_generation(path, known_codes: Iterable[str] | None = None,
                    column_map: Mapping[str, str] | None = None,
                    window: tuple[Month | str, Month | str] | None = None,
                    states: frozenset[str] = CONTIGUOUS_STATES) -> tuple[list[PlantFuelMonth], IngestReport]:
    """Parse and validate a generation CSV.

    Rows outside ``states`` or ``window`` are dropped (and counted). Fuel codes
    not in ``known_codes`` are kept but reported; negative net generation is
    passed through and flagged.
    """
    known = frozenset(known_codes) if known_codes is not None else None
    lo = hi = None
    if window is not None:
        lo, hi = Month.parse(window[0]), Month.parse(window[1])
    records: list[PlantFuelMonth] = []
    report = IngestReport()
    for line, row in _open_rows(path, GENERATION_COLUMNS, column_map):
        state = (row["state"] or "").strip().upper()
        month = _month(row, line, path)
        gen = _number(row["generation_mwh"], "generation_mwh", line, path)
        fuel = _number(row["fuel_consumed_mmbtu"], "fuel_consumed_mmbtu", line, path)
        if fuel < 0:
            raise SchemaError(f"{Path(path).name}:{line}: negative fuel_consumed_mmbtu {fuel}")
        if state not in states:
            report.dropped_state_rows += 1
            continue
        if lo is not None and not (lo <= month <= hi):
            report.dropped_window_rows += 1
            continue
        code = (row["fuel_code"] or "").strip().upper()
        plant = (row["plant_id"] or "").strip()
        if not plant or not code:
            raise SchemaError(f"{Path(path).name}:{line}: empty plant_id or fuel_code")
        if known is not None and code not in known:
            report.unknown_codes[code] = report.unknown_codes.get(code, 0) + 1
            report.warnings.append(f"line {line}: unknown fuel code {code!r}")
        negative = gen < 0
        if negative:
            report.negative_generation_rows += 1
            report.warnings.append(f"line {line}: negative net generation {gen} at plant {plant} {month}")
        records.append(PlantFuelMonth(plant, code, month, gen, fuel, negative))
    if report.warnings:
        log.warning("%s: %d warnings", Path(path).name, report.warning_count)
    return records, report


def load_factors(path, column_map: Mapping[str, str] | None = None) -> EmissionFactorTable:
    factors, cats, prov = {}, {}, {}
    for line, row in _open_rows(path, FACTOR_COLUMNS, column_map):
        code = (row["fuel_code"] or "").strip().upper()
        if code in factors:
            raise SchemaError(f"{Path(path).name}:{line}: duplicate fuel code {code}")
        factors[code] = _number(row["kg_co2_per_mmbtu"], "kg_co2_per_mmbtu", line, path)
        cat = (row.get("category") or "").strip().lower()
        if cat:
            if cat not in FUEL_CATEGORIES + ("zero",):
                raise SchemaError(f"{Path(path).name}:{line}: unknown category {cat!r}")
            cats[code] = cat
        if row.get("provenance"):
            prov[code] = row["provenance"].strip()
    return EmissionFactorTable(factors, cats, prov)


def load_degree_days(path, column_map: Mapping[str, str] | None = None) -> dict[Month, tuple[float, float]]:
    out = {}
    for line, row in _open_rows(path, DEGREE_DAY_COLUMNS, column_map):
        m = _month(row, line, path)
        if m in out:
            raise SchemaError(f"{Path(path).name}:{line}: duplicate month {m}")
        out[m] = (_number(row["hdd"], "hdd", line, path), _number(row["cdd"], "cdd", line, path))
    return out


# ---------------------------------------------------------------------------
# emissions and aggregation


@dataclass(frozen=True)
class EmissionRecord:
    plant_id: str
    month: Month
    fuel_code: str
    category: str
    emissions_kg: float


def compute_emissions(records: Iterable[PlantFuelMonth], factors: EmissionFactorTable) -> list[EmissionRecord]:
    """Fuel consumed x fuel-specific factor, one output per input record."""
    out = []
    for r in records:
        cat = factors.category(r.fuel_code)
        if r.fuel_code in factors.factors:
            kg = r.fuel_consumed_mmbtu * factors.factors[r.fuel_code]
        elif cat in ("coal", "gas", "oil"):
            raise SchemaError(f"no emission factor for fossil fuel code {r.fuel_code!r}")
        else:
            # zero-emission or unknown (already reported at load time)
            kg = 0.0
            cat = "zero"
        out.append(EmissionRecord(r.plant_id, r.month, r.fuel_code, cat, kg))
    return out


def plant_month_totals(emissions: Iterable[EmissionRecord]) -> dict[tuple[str, Month], float]:
    parts: dict[tuple[str, Month], list[float]] = defaultdict(list)
    for e in emissions:
        parts[(e.plant_id, e.month)].append(e.emissions_kg)
    return {k: math.fsum(v) for k, v in sorted(parts.items())}


def aggregate_series(emissions: Iterable[EmissionRecord], records: Iterable[PlantFuelMonth],
                     degree_days: Mapping[Month, tuple[float, float]] | str | Path,
                     window: tuple[Month | str, Month | str]) -> dict[str, MonthlySeries]:
    """National monthly C, E, C/E, HDD, CDD and per-fuel C over ``window``.

    Sums use ``math.fsum`` so results do not depend on input row order.
    """
    if not isinstance(degree_days, Mapping):
        degree_days = load_degree_days(degree_days)
    months = month_range(*window)
    index = {m: i for i, m in enumerate(months)}

    c_parts: dict[str, list[list[float]]] = {c: [[] for _ in months] for c in FUEL_CATEGORIES}
    e_parts: list[list[float]] = [[] for _ in months]
    for e in emissions:
        i = index.get(e.month)
        if i is not None and e.category != "zero":
            c_parts[e.category][i].append(e.emissions_kg)
    for r in records:
        i = index.get(r.month)
        if i is not None:
            e_parts[i].append(r.generation_mwh)

    missing = [str(m) for m, parts in zip(months, e_parts) if not parts]
    if missing:
        raise CoverageError(f"no generation records for month(s): {', '.join(missing)}")
    missing = [str(m) for m in months if m not in degree_days]
    if missing:
        raise CoverageError(f"no degree-day data for month(s): {', '.join(missing)}")

    ann = np.array([annualization_factor(m) for m in months])
    fuel_kg = {c: np.array([math.fsum(p) for p in c_parts[c]]) for c in FUEL_CATEGORIES}
    total_kg = np.array([math.fsum(p for c in FUEL_CATEGORIES for p in c_parts[c][i]) for i in range(len(months))])
    e_mwh = np.array([math.fsum(p) for p in e_parts])
    if np.any(e_mwh <= 0):
        bad = [str(m) for m, v in zip(months, e_mwh) if v <= 0]
        raise SchemaError(f"non-positive total generation in month(s): {', '.join(bad)}")

    out = {
        "C": MonthlySeries("C", months, total_kg / 1e9 * ann, UNITS["C"]),
        "E": MonthlySeries("E", months, e_mwh / 1e6 * ann, UNITS["E"]),
        "C_over_E": MonthlySeries("C_over_E", months, total_kg / e_mwh, UNITS["C_over_E"]),
        "HDD": MonthlySeries("HDD", months, [degree_days[m][0] for m in months], UNITS["HDD"]),
        "CDD": MonthlySeries("CDD", months, [degree_days[m][1] for m in months], UNITS["CDD"]),
    }
    for cat in FUEL_CATEGORIES:
        if cat == "other" and not np.any(fuel_kg[cat]):
            continue
        label = f"C_{cat}"
        out[label] = MonthlySeries(label, months, fuel_kg[cat] / 1e9 * ann, UNITS["C"])
    return out


def run_ingest(generation_path, factors_path, degree_days_path, window,
               column_map: Mapping[str, str] | None = None) -> tuple[dict[str, MonthlySeries], IngestReport]:
    factors = load_factors(factors_path)
    records, report = load_generation(generation_path, factors.known_codes(), column_map, window)
    emissions = compute_emissions(records, factors)
    return aggregate_series(emissions, records, degree_days_path, window), report


# ---------------------------------------------------------------------------
# canonical series file


def series_to_dict(bundle: Mapping[str, MonthlySeries]) -> dict:
    return {
        label: {
            "units": s.units,
            "months": [str(m) for m in s.months],
            "values": [float(v) for v in s.values],
        }
        for label, s in sorted(bundle.items())
    }


def save_series(bundle: Mapping[str, MonthlySeries], path, meta: Mapping | None = None) -> None:
    doc = {"meta": dict(meta or {}), "series": series_to_dict(bundle)}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_series(path) -> dict[str, MonthlySeries]:
    doc = json.loads(Path(path).read_text())
    try:
        items = doc["series"].items()
        return {label: MonthlySeries(label, d["months"], d["values"], d.get("units", "")) for label, d in items}
    except (KeyError, TypeError, AttributeError) as exc:
        raise SchemaError(f"{Path(path).name}: malformed series file ({exc})") from None
