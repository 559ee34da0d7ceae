"""Exception and warning types raised across the package.

Every error carries a short ``code`` naming its class so the CLI can map it
to an exit status without string matching.
"""


class SpecjacError(Exception):
    """Base class for all package errors."""

    code = "SpecjacError"


class ConfigError(SpecjacError):
    """Bad or inconsistent user input (exit status 2 in the CLI)."""

    code = "ConfigError"


class NumericalError(SpecjacError):
    """A computation could not deliver the requested accuracy (exit status 3)."""

    code = "NumericalError"


class AssumptionViolation(ConfigError):
    code = "AssumptionViolation"


class KernelNotRadon(ConfigError):
    code = "KernelNotRadon"


class InvalidDecayParams(ConfigError):
    code = "InvalidDecayParams"


class UnsupportedKernel(ConfigError):
    code = "UnsupportedKernel"


class ParamOutOfRange(ConfigError):
    code = "ParamOutOfRange"


class DomainError(ConfigError, ValueError):
    code = "DomainError"


class QuadratureFailure(NumericalError):
    code = "QuadratureFailure"


class RootNotBracketed(NumericalError):
    code = "RootNotBracketed"


class PoleError(NumericalError, ZeroDivisionError):
    code = "PoleError"


class SlowDecay(NumericalError):
    code = "SlowDecay"


class SlowConvergence(NumericalError):
    code = "SlowConvergence"


class PrecisionLoss(UserWarning):
    """Cancellation in an alternating sum may exceed the working precision."""


class TruncationWarning(UserWarning):
    """A truncated spectral expansion has an estimated tail above tolerance."""
