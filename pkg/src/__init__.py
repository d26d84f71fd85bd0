"""Correlated quantum dephasometry toolkit."""

__version__ = "0.4.0"
