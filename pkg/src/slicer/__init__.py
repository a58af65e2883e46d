"""Placement and channel allocation for slicing-aware flying networks."""

__version__ = "0.1.0"
