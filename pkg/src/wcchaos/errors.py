"""Exception types shared across the package."""

from __future__ import annotations


class ExpressionSyntaxError(SyntaxError):
    """Malformed expression text.

    ``position`` is the 1-based column at which parsing failed.
    """

    def __init__(self, message: str, source: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.source = source
        self.position = position


class DomainError(ArithmeticError):
    """An expression was evaluated outside its domain (log(0), 1/0, ...)."""

    def __init__(self, subexpr: str, x: float, reason: str = "undefined"):
        super().__init__(f"{reason}: {subexpr} at x={x!r}")
        self.subexpr = subexpr
        self.x = x
        self.reason = reason


class StiffnessError(RuntimeError):
    """The ODE integrator could not make progress (step-size underflow or step budget)."""

    def __init__(self, message: str, t: float, state: float):
        super().__init__(f"{message} at t={t!r}, x={state!r}")
        self.t = t
        self.state = state


class HorizonReached(Exception):
    """A lazily extended trajectory cannot be queried beyond ``t_end``."""

    def __init__(self, t_end: float, reason: str):
        super().__init__(f"trajectory ends at t={t_end!r} ({reason})")
        self.t_end = t_end
        self.reason = reason


class MaxSubdivisionsError(RuntimeError):
    def __init__(self, value: float, error: float, limit: int):
        super().__init__(f"subdivision limit {limit} reached (value={value!r}, error={error!r})")
        self.value = value
        self.error = error
        self.limit = limit


class ProblemError(ValueError):
    """A problem document or problem definition is invalid."""
