"""Counterfactual analysis of pandemic-era power-sector CO2 emissions and coal-unit economics."""

__version__ = "0.1.0"
