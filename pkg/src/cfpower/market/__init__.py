"""Coal-unit profitability under counterfactual and current price expectations."""

from .capacity import (CAPACITY_REGIONS, REGIONS, CapacityAuctionBook, CapacityPrice, CommitmentPeriod,
                       commitment_periods, extrapolate_book, load_capacity_prices)
from .dispatch import DispatchResult, monthly_dispatch, price_duration_curve
from .finance import (ANNUAL_WACC, MONTHLY_WACC, CashFlowLedger, MarketScenario, capacity_bid, capacity_revenue,
                      discount_factors, monthly_rate, npv, unit_profitability)
from .fleet import AtRiskReport, MarketResult, build_scenarios, classify_at_risk, run_market
from .prices import (ANALYSIS_END, ANALYSIS_START, HourlyPriceSeries, build_hourly_scenario, load_hourly_prices,
                     load_monthly_forecasts, reconstruct_month, select_template)
from .units import GenerationUnit, analysis_fleet, load_units
