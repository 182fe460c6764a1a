"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations


class SasakiError(Exception):
    """Base class for all errors raised by this package."""


class NumericalError(SasakiError):
    """A computation could not be completed to the requested accuracy."""


class NonConvergent(NumericalError):
    pass


class DivergentSuspected(NumericalError):
    pass


class SingularMetric(NumericalError):
    pass


class DomainError(SasakiError, ValueError):
    pass


class IndexNotAllowed(SasakiError, ValueError):
    pass


class EmptySectionSpace(SasakiError, ValueError):
    pass


class WrongModel(SasakiError, ValueError):
    pass


class NonPositiveFactor(SasakiError, ValueError):
    pass


class ModelFileError(SasakiError, ValueError):
    pass


class PositivityViolation(SasakiError, ValueError):
    def __init__(self, points, message=None):
        self.points = list(points)
        if message is None:
            shown = ", ".join(repr(float(p)) for p in self.points[:8])
            message = f"deformed density is not positive at u = {shown}"
            if len(self.points) > 8:
                message += f" (+{len(self.points) - 8} more)"
        super().__init__(message)


class NotEtaEinstein(SasakiError):
    def __init__(self, spread, message=None):
        self.spread = float(spread)
        super().__init__(
            message
            or f"transverse curvature is not constant (spread {self.spread:.3e})"
        )
