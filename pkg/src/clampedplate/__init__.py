"""Clamped plate eigenvalues and the inequalities they satisfy.

Modules: ``specfun`` (Bessel functions, disk roots), ``geometry``
(planar domains), ``spectra`` (analytic and finite-difference
eigenvalues), ``bounds`` (eigenvalue bounds and checks) and ``harness``
(configuration, cache, reports, CLI).
"""

from . import bounds, geometry, harness, specfun, spectra

__version__ = "0.1.0"

__all__ = ["bounds", "geometry", "harness", "specfun", "spectra"]
