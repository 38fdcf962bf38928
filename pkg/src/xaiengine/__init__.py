"""Model-agnostic explanation engine for tabular data and univariate time series."""

__version__ = "0.1.0"
