"""Barrier solvers and particle simulators for the heat equation with
order-respecting absorption."""

__version__ = "0.1.0"
