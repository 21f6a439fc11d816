"""Regret minimization, learned predictors and marginalizability for extensive-form games."""

__version__ = "0.1.0"
