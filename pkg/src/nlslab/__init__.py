"""Pseudospectral laboratory for cubic dispersive equations with multiplier nonlinearities."""
__version__ = "0.1.0"
