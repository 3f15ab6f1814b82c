"""Numerical lab for Lipschitz bounds of minimizers of non-autonomous (p,q)-growth functionals.

Modules
-------
exponents   regime classification, the bound function G, Moser exponent schedules
orlicz      the weights L and L-hat, polars, and the scalar lemmas as numeric checks
integrand   catalog of radial energy densities, assumption checks, truncation, mollification
solver      piecewise-affine minimization with Dirichlet data on a cube
estimates   Caccioppoli and Lipschitz-bound measurements, Moser bookkeeping, scans
cli         command-line orchestration
"""
from .errors import PQGLError
from .exponents import ExponentSet, GrowthCase, classify

__all__ = ["ExponentSet", "GrowthCase", "PQGLError", "classify"]
__version__ = "0.1.0"
