"""Price-taking dispatch against a month of hourly prices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .units import GenerationUnit


@dataclass(frozen=True)
class DispatchResult:
    electricity_revenue: float
    variable_cost: float
    online_hours: int

    @property
    def energy_profit(self) -> float:
        return self.electricity_revenue - self.variable_cost


def price_duration_curve(prices) -> np.ndarray:
    """Hourly prices sorted from highest to lowest."""
    return np.sort(np.asarray(prices, dtype=float))[::-1].copy()


_SPLIT = 2.0**27 + 1.0


def _split(a):
    # Veltkamp: a == hi + lo with each half short enough that pairwise products are exact
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def scaled_sum(values: np.ndarray, scale: float) -> float:
    """``scale * sum(values)`` rounded once from the exact real result."""
    if values.shape[0] == 0:
        return 0.0
    vh, vl = _split(values)
    sh, sl = _split(np.float64(scale))
    parts = np.concatenate([vh * sh, vh * sl, vl * sh, vl * sl])
    return math.fsum(parts.tolist())


def monthly_dispatch(unit: GenerationUnit, prices) -> DispatchResult:
    """Run at full capacity in every hour whose price is >= the unit's variable cost.

    Revenue and variable cost are correctly rounded from their exact values,
    so the result does not depend on hour order.
    """
    prices = np.asarray(prices, dtype=float)
    vc = unit.variable_cost_per_mwh
    online = prices[prices >= vc]
    n = int(online.shape[0])
    revenue = scaled_sum(online, unit.capacity_mw)
    variable = float(n * Fraction(vc) * Fraction(unit.capacity_mw))
    return DispatchResult(revenue, variable, n)
