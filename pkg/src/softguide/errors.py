"""Exception hierarchy shared by the numerical modules and the CLI.

Each family maps to a distinct process exit code in :mod:`softguide.cli`.
"""


class SoftguideError(Exception):
    exit_code = 1


class ConfigError(SoftguideError, ValueError):
    exit_code = 2


class GeometryError(ConfigError):
    """Trap support intersects the strip, or a geometry is malformed."""


class SheetError(ConfigError):
    """Requested Riemann sheet is inconsistent with the energy."""


class RegimeError(SoftguideError):
    """Distance too small (or too large) for the perturbative pole theory."""

    exit_code = 3


class SolverError(SoftguideError):
    exit_code = 4


class MultiplicityError(SolverError):
    pass


class UniquenessError(SolverError):
    pass


class AccuracyError(SoftguideError):
    exit_code = 5


class CancellationError(AccuracyError):
    pass


class ThresholdError(AccuracyError):
    """Energy sits on (or too close to) a channel threshold."""


class BranchCutError(SoftguideError, ValueError):
    exit_code = 5


class SingularityError(SoftguideError, ValueError):
    exit_code = 5


class PoleError(SoftguideError, ValueError):
    exit_code = 5


class BranchPointWarning(RuntimeWarning):
    pass


class DomainError(ConfigError):
    """Input outside the mathematical domain of an operation (e.g. log of a nonpositive value)."""
