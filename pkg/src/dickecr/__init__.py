"""Collapse-revival dynamics of the non-resonant Dicke model."""

__version__ = "0.1.0"
