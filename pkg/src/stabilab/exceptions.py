"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An input lies outside the certified domain of a loss model."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    Carries the certificate value that was achieved so callers can decide
    whether the partial answer is usable.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved certificate {achieved:.3e})")
        self.achieved = achieved


class NonFiniteIterateError(RuntimeError):
    """An optimization iterate became NaN or infinite."""

    def __init__(self, step: int):
        super().__init__(f"iterate became non-finite at step {step}")
        self.step = step
