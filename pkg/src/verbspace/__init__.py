"""Structured verb semantic space: taxonomy, label harmonization, hyperbolic P2S alignment."""

__version__ = "0.1.0"
