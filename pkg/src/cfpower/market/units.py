"""Coal generation units and the units CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import SchemaError
from ..months import Month
from .capacity import canonical_region

UNIT_COLUMNS = ("unit_id", "region", "zone", "capacity_mw", "variable_cost_usd_per_mwh",
                "fixed_om_usd_per_mw_year", "in_service", "cogen")
_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n", ""}


@dataclass(frozen=True)
class GenerationUnit:
    unit_id: str
    region: str
    zone: str
    capacity_mw: float
    variable_cost_per_mwh: float
    fixed_om_per_mw_year: float
    in_service: Month
    cogeneration: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "region", canonical_region(self.region))
        object.__setattr__(self, "in_service", Month.parse(self.in_service))
        if not self.capacity_mw > 0:
            raise SchemaError(f"{self.unit_id}: capacity must be > 0")
        if not (self.variable_cost_per_mwh >= 0 and self.fixed_om_per_mw_year >= 0):
            raise SchemaError(f"{self.unit_id}: costs must be >= 0")

    def in_service_during(self, m: Month) -> bool:
        return self.in_service <= m

    def age_years(self, at: Month) -> float:
        return (at - self.in_service) / 12.0


def _flag(raw: str, line: int, path) -> bool:
    key = (raw or "").strip().lower()
    if key in _TRUE:
        return True
    if key in _FALSE:
        return False
    raise SchemaError(f"{Path(path).name}:{line}: bad cogen flag {raw!r}")


def load_units(path) -> list[GenerationUnit]:
    """All units in the CSV, cogeneration units included (filter with ``analysis_fleet``)."""
    path = Path(path)
    units, seen = [], set()
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in UNIT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path.name}: missing required column {missing[0]!r}")
        for row in reader:
            line = reader.line_num
            try:
                nums = [float(row[c]) for c in ("capacity_mw", "variable_cost_usd_per_mwh", "fixed_om_usd_per_mw_year")]
                in_service = Month.parse(row["in_service"])
            except ValueError as exc:
                raise SchemaError(f"{path.name}:{line}: {exc}") from None
            if not all(math.isfinite(v) for v in nums):
                raise SchemaError(f"{path.name}:{line}: non-finite number")
            uid = row["unit_id"].strip()
            if uid in seen:
                raise SchemaError(f"{path.name}:{line}: duplicate unit_id {uid}")
            seen.add(uid)
            units.append(GenerationUnit(uid, row["region"], row["zone"].strip(), *nums, in_service,
                                        _flag(row["cogen"], line, path)))
    return units


def analysis_fleet(units):
    return [u for u in units if not u.cogeneration]
