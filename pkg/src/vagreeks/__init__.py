"""Metamodelling of variable annuity portfolio Greeks."""

__version__ = "0.1.0"
