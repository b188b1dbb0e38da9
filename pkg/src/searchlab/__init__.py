"""Desk-scale laboratory for falsified-clause search on random CNFs."""

__version__ = "0.1.0"
