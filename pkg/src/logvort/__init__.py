"""Numerical laboratory for log-regularized critical Sobolev norms and 2D Euler deformation."""

__version__ = "0.1.0"
