"""
diagrank errors - exception hierarchy shared by every module.

Library code raises these; only cli.py catches them and turns them into exit codes.
"""


class DiagrankError(Exception):
    """Root of all diagrank errors."""


class FormatError(DiagrankError, ValueError):
    """Malformed input file, text or JSON document."""


class DimensionError(DiagrankError, ValueError):
    """Operands whose shapes do not conform."""


class NonFiniteError(DiagrankError, ValueError):
    """A float-mode matrix contains NaN or infinity."""


class SingularBlockError(DiagrankError, ArithmeticError):
    """M(J,J) is singular and the range condition fails."""


class SingularMatrixError(DiagrankError, ArithmeticError):
    """A matrix that must be invertible is singular."""


class InconsistentSystemError(DiagrankError, ValueError):
    """Row reduction exposed an equation 0 = c with c != 0."""

    def __init__(self, message: str, certificate: str = ""):
        super().__init__(message)
        self.certificate = certificate or message


class VariableCapExceededError(DiagrankError, ValueError):
    """A polynomial system has more unknowns than the solver accepts."""


class InstanceError(DiagrankError, ValueError):
    """An Instance violates its invariants."""


class RouteCapError(DiagrankError, ValueError):
    """The compiled (P3) route was asked to handle too many free pairs."""


class SizeCapError(DiagrankError, ValueError):
    """A brute-force oracle input is above its size cap."""


class TooManyUnknownsError(DiagrankError, ValueError):
    """A completion search has more unspecified entries than it can grid."""


class EpsOutOfRangeError(DiagrankError, ValueError):
    """The perturbation budget is outside the range the construction supports."""


class SMallTooSmallError(DiagrankError, ValueError):
    """The scale parameter s violates an inequality the witness relies on."""


class WitnessError(DiagrankError, ValueError):
    """A source certificate (colouring, solution, fill) is invalid."""
