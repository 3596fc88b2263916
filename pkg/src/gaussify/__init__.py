"""Simulation and analysis of Gaussifying entanglement-distillation protocols.

Modules
-------
fock      truncated multimode Fock-space linear algebra
gaussian  covariance-matrix algebra for Gaussian operators
filters   the Delta-parameterized thermal filter family
engine    exact one-round map and multi-round runs
moments   normally ordered moment recursion and its strong-convergence check
analysis  doubling law, limit prediction, convergence reports, sweeps
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    GaussifyError,
    NumericalGuardError,
    TheoremConditionError,
)

__all__ = ["__version__", "ConfigError", "GaussifyError", "NumericalGuardError", "TheoremConditionError"]
