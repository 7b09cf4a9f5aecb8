"""Calendar-month arithmetic used throughout the package."""

from __future__ import annotations

import calendar
import re
from dataclasses import dataclass
from typing import Iterator

_MONTH_RE = re.compile(r"^\s*(\d{4})-(\d{1,2})\s*$")


@dataclass(frozen=True, order=True)
class Month:
    """A single calendar month, e.g. ``Month(2020, 4)``."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    @classmethod
    def parse(cls, text: str | Month) -> Month:
        if isinstance(text, Month):
            return text
        m = _MONTH_RE.match(str(text))
        if m is None:
            raise ValueError(f"not a YYYY-MM month: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_ordinal(cls, n: int) -> Month:
        y, m = divmod(int(n), 12)
        return cls(y, m + 1)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    @property
    def days(self) -> int:
        return calendar.monthrange(self.year, self.month)[1]

    @property
    def hours(self) -> int:
        return self.days * 24

    def __add__(self, n: int) -> Month:
        return Month.from_ordinal(self.ordinal + n)

    def __sub__(self, other: Month | int):
        if isinstance(other, Month):
            return self.ordinal - other.ordinal
        return Month.from_ordinal(self.ordinal - other)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: Month | str, end: Month | str) -> list[Month]:
    """Inclusive list of months from ``start`` to ``end``."""
    start, end = Month.parse(start), Month.parse(end)
    return [Month.from_ordinal(k) for k in range(start.ordinal, end.ordinal + 1)]


def iter_months(start: Month, n: int) -> Iterator[Month]:
    for k in range(n):
        yield start + k


def annualization_factor(m: Month) -> float:
    # 365-day year in the numerator; the month's actual length below
    return 365.0 / m.days
