"""Invariant-representation anomaly detection under domain shift, at desk scale."""

__version__ = "0.1.0"
