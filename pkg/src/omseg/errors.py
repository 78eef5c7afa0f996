"""Exception hierarchy shared by every omseg module."""

from __future__ import annotations


class OmsError(Exception):
    """Base class for all omseg errors."""


class ValidationError(OmsError, ValueError):
    """An input violates a documented precondition."""


class EventParseError(ValidationError):
    def __init__(self, lineno: int, message: str) -> None:
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class BoundsError(ValidationError):
    """An event or pixel coordinate falls outside the sensor geometry."""


class FeasibilityError(ValidationError):
    """An OMS configuration cannot be realized on the compute array.

    ``violations`` lists every broken constraint, not just the first.
    """

    def __init__(self, violations: list[str]) -> None:
        self.violations = list(violations)
        super().__init__("infeasible hardware config: " + "; ".join(self.violations))
