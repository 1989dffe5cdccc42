"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numeric failures exit 3, and I/O errors (plain ``OSError``) exit 4.
"""
from __future__ import annotations


class ConfigError(Exception):
    """A schema, feature declaration, or command configuration is invalid."""


class NumericError(Exception):
    """A numeric routine failed: non-positive-definite matrix, degenerate
    input, or a computation that cannot proceed."""


class ConvergenceError(NumericError):
    """An iterative optimizer stopped without meeting its tolerance.

    Carries the last iterate and its gradient norm so callers can inspect
    or restart from where the search ended.
    """

    def __init__(self, message: str, last_iterate=None, grad_norm: float | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm
