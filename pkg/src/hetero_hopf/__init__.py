"""Hopf bifurcation analysis for a predator-prey reaction-diffusion-advection
model in a heterogeneous one-dimensional habitat.

Modules: ``expr`` (profile expressions), ``quad`` (weighted quadrature),
``reduced`` (small-λ reduced theory), ``odesim`` (weighted ODEs),
``linalg`` (LU and QR eigenvalues), ``pdesim`` (method of lines, spectra),
``config`` and ``cli``.
"""

from .expr import EnvProfile, load_profile, parse
from .reduced import ModelParams, find_alpha_star, find_hopf, solve_c0l

__all__ = [
    "EnvProfile",
    "ModelParams",
    "find_alpha_star",
    "find_hopf",
    "load_profile",
    "parse",
    "solve_c0l",
]
__version__ = "0.1.0"
