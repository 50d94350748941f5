"""Numerical laboratory for the tau-deformed Schouten eigenvalue problem.

Modules
-------
cones        Garding cones, lambda^tau maps, defining functions.
geometry     Schouten calculus and the S^1 x N grid reduction.
viscosity    sup-convolution, inclusion checks, deformation harness.
solver       Newton / continuation solver and eigenvalue extraction.
diagnostics  per-metric functionals and Ricci pinching.
cli          INI-driven batch runner.
"""

from .cones import ConeSpec, gamma_k, tau_transform
from .geometry import CohomOneModel, Normalization

__all__ = ["ConeSpec", "gamma_k", "tau_transform", "CohomOneModel", "Normalization"]
__version__ = "0.1.0"
