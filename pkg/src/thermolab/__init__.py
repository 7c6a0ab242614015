"""Estimators for thermodynamic quantities of partially hyperbolic toral maps."""

__version__ = "0.1.0"
