"""Majority-rule belief evolution on social networks: simulation and exhaustive analysis."""

__version__ = "0.1.0"
