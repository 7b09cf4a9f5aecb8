"""Capacity commitment-period calendars and zonal auction clearing prices."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable

from ..errors import CoverageError, SchemaError
from ..months import Month, month_range

REGIONS = ("CAISO", "ERCOT", "ISO-NE", "MISO", "NYISO", "PJM", "SPP")
CAPACITY_REGIONS = frozenset({"ISO-NE", "MISO", "NYISO", "PJM"})
_ALIASES = {"NE": "ISO-NE", "ISONE": "ISO-NE", "NEW ENGLAND": "ISO-NE", "NY": "NYISO", "NEW YORK": "NYISO"}

# Number of prior periods (same season for NYISO) averaged to fill periods
# with no published clearing price. ISO-NE has actuals through the window.
LOOKBACK = {"PJM": 5, "MISO": 4, "NYISO": 3, "ISO-NE": 0}

CAPACITY_COLUMNS = ("region", "zone", "cp_start", "cp_end", "clearing_usd_per_mw_day", "provenance")


def canonical_region(name: str) -> str:
    key = name.strip().upper()
    region = _ALIASES.get(key, key)
    if region not in REGIONS:
        raise SchemaError(f"unknown market region {name!r}")
    return region


@dataclass(frozen=True, order=True)
class CommitmentPeriod:
    start: Month
    end: Month
    season: str  # annual | summer | winter

    @property
    def months(self) -> list[Month]:
        return month_range(self.start, self.end)

    @property
    def days(self) -> int:
        return sum(m.days for m in self.months)

    def label(self) -> str:
        if self.season == "annual":
            return f"{self.start.year}/{self.end.year}"
        return f"{self.season}-{self.start.year}"


def _period_containing(region: str, m: Month) -> CommitmentPeriod:
    if region == "NYISO":
        if 5 <= m.month <= 10:
            return CommitmentPeriod(Month(m.year, 5), Month(m.year, 10), "summer")
        y = m.year if m.month >= 11 else m.year - 1
        return CommitmentPeriod(Month(y, 11), Month(y + 1, 4), "winter")
    y = m.year if m.month >= 6 else m.year - 1
    return CommitmentPeriod(Month(y, 6), Month(y + 1, 5), "annual")


def commitment_periods(region: str, start: Month | str, end: Month | str) -> list[CommitmentPeriod]:
    """Commitment periods overlapping ``start..end``, in order.

    MISO, ISO-NE and PJM run annual June-May periods; NYISO runs summer
    (May-Oct) and winter (Nov-Apr) periods.
    """
    region = canonical_region(region)
    if region not in CAPACITY_REGIONS:
        return []
    start, end = Month.parse(start), Month.parse(end)
    out = []
    m = start
    while m <= end:
        cp = _period_containing(region, m)
        out.append(cp)
        m = cp.end + 1
    return out


@dataclass(frozen=True)
class CapacityPrice:
    zone: str
    period: CommitmentPeriod
    clearing_usd_per_mw_day: float
    provenance: str = "actual"


@dataclass
class CapacityAuctionBook:
    region: str
    prices: dict[tuple[str, CommitmentPeriod], CapacityPrice] = field(default_factory=dict)

    def add(self, price: CapacityPrice) -> None:
        key = (price.zone, price.period)
        if key in self.prices:
            raise SchemaError(f"{self.region}/{price.zone}: duplicate price for {price.period.label()}")
        for other_zone, other in self.prices:
            if other_zone == price.zone and other.start <= price.period.end and price.period.start <= other.end:
                raise SchemaError(f"{self.region}/{price.zone}: {price.period.label()} overlaps {other.label()}")
        self.prices[key] = price

    @property
    def zones(self) -> list[str]:
        return sorted({z for z, _ in self.prices})

    def periods(self, zone: str) -> list[CommitmentPeriod]:
        return sorted(cp for z, cp in self.prices if z == zone)

    def price(self, zone: str, cp: CommitmentPeriod) -> CapacityPrice:
        try:
            return self.prices[(zone, cp)]
        except KeyError:
            raise CoverageError(f"{self.region}: no clearing price for zone {zone!r} in {cp.label()}") from None

    def check_tiles(self, zone: str, start: Month, end: Month) -> None:
        for cp in commitment_periods(self.region, start, end):
            self.price(zone, cp)


def _parse_date(raw: str, line: int, path) -> date:
    try:
        return date.fromisoformat(raw.strip())
    except (AttributeError, ValueError):
        raise SchemaError(f"{Path(path).name}:{line}: bad date {raw!r}") from None


def load_capacity_prices(path) -> dict[str, CapacityAuctionBook]:
    """Read the capacity-prices CSV into one book per region."""
    books: dict[str, CapacityAuctionBook] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CAPACITY_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{Path(path).name}: missing required column {missing[0]!r}")
        for row in reader:
            line = reader.line_num
            region = canonical_region(row["region"])
            if region not in CAPACITY_REGIONS:
                raise SchemaError(f"{Path(path).name}:{line}: {region} has no capacity market")
            d0 = _parse_date(row["cp_start"], line, path)
            d1 = _parse_date(row["cp_end"], line, path)
            cp = _period_containing(region, Month(d0.year, d0.month))
            end_m = Month(d1.year, d1.month)
            if d0.day != 1 or d1.day != end_m.days or cp.start != Month(d0.year, d0.month) or cp.end != end_m:
                raise SchemaError(f"{Path(path).name}:{line}: {d0}..{d1} is not a {region} commitment period")
            try:
                g = float(row["clearing_usd_per_mw_day"])
            except ValueError:
                raise SchemaError(f"{Path(path).name}:{line}: bad clearing price "
                                  f"{row['clearing_usd_per_mw_day']!r}") from None
            if not (math.isfinite(g) and g >= 0):
                raise SchemaError(f"{Path(path).name}:{line}: clearing price must be finite and >= 0")
            prov = (row["provenance"] or "actual").strip()
            books.setdefault(region, CapacityAuctionBook(region)).add(
                CapacityPrice(row["zone"].strip(), cp, g, prov))
    return books


def extrapolate_book(book: CapacityAuctionBook, start: Month | str, end: Month | str,
                     zones: Iterable[str] | None = None) -> CapacityAuctionBook:
    """Fill commitment periods in ``start..end`` that lack a published price.

    A missing period gets the mean of the most recent ``LOOKBACK[region]``
    actual periods (same season for NYISO) before it. Every extrapolated period
    of a zone uses the same set of actuals; extrapolated values are never fed
    back into later averages.
    """
    n_back = LOOKBACK[book.region]
    out = CapacityAuctionBook(book.region, dict(book.prices))
    for zone in (sorted(zones) if zones is not None else book.zones):
        for cp in commitment_periods(book.region, start, end):
            if (zone, cp) in out.prices:
                continue
            if n_back == 0:
                raise CoverageError(f"{book.region}/{zone}: no clearing price for {cp.label()}")
            prior = [p for (z, c), p in book.prices.items()
                     if z == zone and c.season == cp.season and c.end < cp.start and p.provenance == "actual"]
            prior.sort(key=lambda p: p.period)
            if len(prior) < n_back:
                raise CoverageError(f"{book.region}/{zone}: need {n_back} prior periods to extrapolate "
                                    f"{cp.label()}, have {len(prior)}")
            avg = math.fsum(p.clearing_usd_per_mw_day for p in prior[-n_back:]) / n_back
            out.add(CapacityPrice(zone, cp, avg, "extrapolated-average"))
    return out
