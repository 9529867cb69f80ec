"""
Exception hierarchy for the shift engine.

Every error carries the CLI exit code it maps to:
    2 - configuration error
    3 - runtime / numeric error
Property failures are not exceptions; verify suites report them as results.
"""
from typing import Optional


class ShiftEngineError(Exception):
    """Base class for all engine errors."""

    exit_code = 3


class ConfigError(ShiftEngineError, ValueError):
    """Bad, missing or unknown configuration value."""

    exit_code = 2

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DimensionMismatchError(ShiftEngineError, ValueError):
    """Two vectors (or a vector and a subspace) disagree on dimension."""

    def __init__(self, left: int, right: int, what: str = "vectors"):
        self.left = left
        self.right = right
        super().__init__(f"dimension mismatch between {what}: {left} != {right}")


class DegenerateError(ShiftEngineError, ValueError):
    """A quantity is undefined for the given input (zero norm, zero residual, ...)."""


class UndefinedQuantityError(DegenerateError):
    """A diagnostic (Lyapunov ratio, upper envelope) is undefined at this state."""


class NumericBlowUpError(ShiftEngineError, ArithmeticError):
    """A state update produced non-finite values."""

    def __init__(self, step: int, particle: Optional[int] = None, detail: str = ""):
        self.step = step
        self.particle = particle
        where = f"particle {particle} " if particle is not None else ""
        msg = f"non-finite state for {where}at step {step}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


class RateFitError(ShiftEngineError, ValueError):
    """The records cannot support the requested least-squares fit."""
