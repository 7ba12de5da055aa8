"""Testbed for gradient-based evasion attacks against a daily-retrained NIDS classifier."""

__version__ = "0.1.0"
