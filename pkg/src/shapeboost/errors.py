"""Exception types shared across the package.

The CLI maps :class:`DataError` to exit code 2 and :class:`SolverError` to
exit code 3; library code raises plain ``ValueError`` for programming
mistakes (wrong shapes passed between internal calls).
"""

from __future__ import annotations

__all__ = ["DataError", "SolverError"]


class DataError(ValueError):
    """Malformed or inconsistent input data (files, labels, shapes)."""


class SolverError(RuntimeError):
    """An optimization routine failed or produced an inconsistent result."""

    def __init__(self, message: str, best: object | None = None) -> None:
        super().__init__(message)
        # Best iterate found before the failure, when one exists.
        self.best = best
