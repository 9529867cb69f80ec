"""Adversarial covariate-shift simulation engine."""

__version__ = "0.3.0"
