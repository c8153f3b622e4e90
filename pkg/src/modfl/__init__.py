"""Multi-objective decision-focused learning for linear programs."""

__version__ = "0.1.0"
