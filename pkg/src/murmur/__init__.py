"""Exact murmuration averages from trace formulas, class numbers and quadratic forms."""

__version__ = "0.1.0"
