"""Evidential Bayesian quantile regression with disentangled uncertainty."""

__version__ = "0.1.0"
