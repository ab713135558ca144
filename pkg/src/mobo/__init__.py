"""Multi-objective Bayesian optimization with an entropy-search acquisition."""

__version__ = "0.1.0"
