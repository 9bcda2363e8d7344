"""Exception types shared across the package.

Two families matter to callers: :class:`InputDataError` covers everything wrong
with user-supplied data or configuration (the CLI maps these to exit code 2),
while :class:`ComputationError` covers failures inside model fitting or
evaluation (exit code 1).
"""

from __future__ import annotations


class HybridcastError(Exception):
    """Base class for all package errors."""


class InputDataError(HybridcastError, ValueError):
    """Bad input data or configuration supplied by the caller."""


class DataFormatError(InputDataError):
    """Structurally malformed input (bad header, unknown config key, ...)."""


class RowParseError(InputDataError):
    """A specific data row could not be parsed. Carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class AlignmentError(InputDataError):
    """Regions could not be aligned onto a shared date axis."""


class DateLookupError(InputDataError):
    """A requested date is not a valid trial start for the series."""


class ComputationError(HybridcastError, ValueError):
    """Numerical or model-level failure during fitting or evaluation."""


class LengthError(ComputationError):
    """A series or matrix is too short for the requested operation."""


class DegenerateRangeError(ComputationError):
    """Scaler fit on data whose max equals its min."""


class SingularDesignError(ComputationError):
    """Rank-deficient design matrix in a least-squares fit."""


class DimensionError(ComputationError):
    """Mismatched shapes between a model and its inputs."""


class TrainingDivergenceError(ComputationError):
    """Training loss became non-finite. Carries the offending epoch index."""

    def __init__(self, epoch: int, message: str | None = None):
        super().__init__(message or f"training diverged at epoch {epoch}")
        self.epoch = epoch


class StationarityError(ComputationError):
    """Strict stationarity check rejected a differenced series."""
