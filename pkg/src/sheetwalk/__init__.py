"""Uniform transport approximations of the Brownian sheet, with a coupling lab."""

__version__ = "0.1.0"
