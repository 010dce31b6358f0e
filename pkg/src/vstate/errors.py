"""Exception types raised by the solver stack."""

from __future__ import annotations

from typing import Any


class VStateError(Exception):
    """Base class for all package errors."""


class InvalidInputError(VStateError, ValueError):
    """An argument is non-finite, of the wrong shape or otherwise unusable."""


class DomainError(VStateError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class InvalidConfigError(VStateError, ValueError):
    """A configuration value violates its documented constraints."""


class GeometryError(VStateError):
    """A boundary curve is not simple or has collapsed."""


class StagnationError(VStateError):
    """The co-rotating boundary speed dropped below the stagnation floor.

    Signals the approach to a limiting state with a boundary stagnation point.
    """

    def __init__(self, message: str, min_speed: float = float("nan")):
        super().__init__(message)
        self.min_speed = min_speed


class AssemblyError(VStateError):
    """The linearised boundary-integral system contains non-finite entries."""


class BifurcationPointError(VStateError):
    """The linearised operator is (numerically) singular."""

    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(message)
        self.condition = condition


class NonConvergenceError(VStateError):
    """Newton iteration hit ``max_iters`` without meeting the tolerance."""

    def __init__(self, message: str, residual: float = float("nan"), last: Any = None):
        super().__init__(message)
        self.residual = residual
        self.last = last


class SeedingError(VStateError):
    """A bifurcation seed collapsed back onto the trivial (circular) branch."""


class PartialResultError(VStateError):
    """A multi-stage path stopped early; carries the last good state."""

    def __init__(self, message: str, last_good: Any = None, eps_reached: float = float("nan")):
        super().__init__(message)
        self.last_good = last_good
        self.eps_reached = eps_reached
