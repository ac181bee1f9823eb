"""Velocity alignment on flat quotient manifolds, summed over all geodesics."""

__version__ = "0.1.0"
