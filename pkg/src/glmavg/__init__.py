"""Geometric Lagrangian averaging on diffeomorphism groups: means, closures,
averaged Lagrangians and the resulting Euler-alpha / EPDiff / Camassa-Holm
solvers."""

__version__ = "0.1.0"
