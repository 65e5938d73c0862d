"""Exact integration and Fourier analysis of constructible exponential
functions over p-adic-style valued fields, with numeric local-field
oracles for validation."""

__version__ = "0.1.0"

from . import cells, dsl, expr, fourier, integrate, lring, localfield, oracle, presburger  # noqa: F401
