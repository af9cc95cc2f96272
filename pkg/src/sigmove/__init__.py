"""Toolkit for forecasting significant daily stock-price moves."""

__version__ = "0.1.0"
