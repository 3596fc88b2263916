"""Exception hierarchy.

The CLI maps these onto exit codes: ``ConfigError`` -> 1,
``NumericalGuardError`` -> 2, ``TheoremConditionError`` -> 3.
"""


class GaussifyError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GaussifyError, ValueError):
    """Invalid experiment configuration."""


class BasisError(GaussifyError, ValueError):
    """Operators or arguments incompatible with a Fock basis."""


class NumericalGuardError(GaussifyError):
    """A numerical accuracy guard tripped; results would be untrustworthy."""


class DisplacementAccuracyError(NumericalGuardError):
    """Truncated displacement operator not converged."""


class SingularMatrixError(NumericalGuardError):
    """Matrix inverse requested for an (numerically) singular matrix."""


class LeakageError(NumericalGuardError):
    """Trace removed by re-truncation exceeded the configured bound."""


class AcceptanceError(NumericalGuardError):
    """Filter acceptance tr(rho Pi) vanished."""


class FilterError(GaussifyError, ValueError):
    """Invalid filter parameters or unsupported filter operation."""


class TheoremConditionError(GaussifyError):
    """A convergence-theorem hypothesis is violated for the given input."""
