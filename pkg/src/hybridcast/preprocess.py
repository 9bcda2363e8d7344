"""Series preparation: smoothing, differencing, rescaling, supervised reshaping.

The pipeline applied to each trial window is

    smooth (trailing mean) -> difference once -> train/test split ->
    rescale on train statistics -> sliding-window supervised matrices

and every step here is exactly invertible where the model needs it to be
(unscale, undifference) so predictions can be mapped back to case counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRangeError, LengthError, SingularDesignError
from .ingest import TimeSeries
from .linalg import solve_with_standard_errors

# Asymptotic critical values for the constant-only Dickey-Fuller distribution.
ADF_CRITICAL_VALUES = {"1%": -3.43, "5%": -2.86, "10%": -2.57}


@dataclass(frozen=True)
class ScalerParams:
    """Train-split statistics for (x - mean) / (max - min) rescaling."""

    mean: float
    minimum: float
    maximum: float

    def __post_init__(self):
        if not (self.maximum > self.minimum):
            raise DegenerateRangeError(
                f"scaler range is degenerate: min {self.minimum} >= max {self.maximum}"
            )

    @property
    def spread(self) -> float:
        return self.maximum - self.minimum


@dataclass
class SupervisedMatrix:
    """Sliding lag windows (oldest value first) paired with next-step targets."""

    inputs: np.ndarray  # (rows, lag)
    targets: np.ndarray  # (rows,)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.ndim != 2 or self.targets.ndim != 1:
            raise ValueError("inputs must be 2-d and targets 1-d")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"{self.inputs.shape[0]} input rows vs {self.targets.shape[0]} targets"
            )

    @property
    def rows(self) -> int:
        return self.inputs.shape[0]

    @property
    def lag(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class AdfResult:
    """Outcome of the lag-0 Dickey-Fuller unit-root regression."""

    statistic: float
    critical_values: dict[str, float]
    stationary: bool
    nobs: int


def smooth(values: np.ndarray, tau: int = 7) -> np.ndarray:
    """Trailing moving average: output[j] = mean(values[j : j + tau]).

    Length shrinks to n - tau + 1; each output is anchored on the last day of
    its window.
    """
    values = np.asarray(values, dtype=float)
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if len(values) < tau:
        raise LengthError(f"need at least tau={tau} values, got {len(values)}")
    kernel = np.ones(tau) / tau
    return np.convolve(values, kernel, mode="valid")


def smooth_series(series: TimeSeries, tau: int = 7) -> TimeSeries:
    """Smooth a dated series, anchoring each mean on its window's last date."""
    return TimeSeries(series.region, series.dates[tau - 1 :], smooth(series.values, tau))


def difference(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Apply first differences `order` times; length shrinks by `order`."""
    values = np.asarray(values, dtype=float)
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    if len(values) <= order:
        raise LengthError(f"need more than order={order} values, got {len(values)}")
    for _ in range(order):
        values = values[1:] - values[:-1]
    return values


def undifference(predicted_diff: float, previous: float) -> float:
    """Map a predicted first difference back to the level scale."""
    return previous + predicted_diff


def fit_scaler(train_values: np.ndarray) -> ScalerParams:
    """Fit mean/min/max on the training split only."""
    train_values = np.asarray(train_values, dtype=float)
    if train_values.size == 0:
        raise LengthError("cannot fit a scaler on an empty split")
    return ScalerParams(
        mean=float(train_values.mean()),
        minimum=float(train_values.min()),
        maximum=float(train_values.max()),
    )


def scale(values: np.ndarray, scaler: ScalerParams) -> np.ndarray:
    """(x - mean) / (max - min); training data lands inside [-1, 1]."""
    return (np.asarray(values, dtype=float) - scaler.mean) / scaler.spread


def unscale(values: np.ndarray, scaler: ScalerParams) -> np.ndarray:
    """Exact inverse of scale."""
    return np.asarray(values, dtype=float) * scaler.spread + scaler.mean


def reshape_supervised(values: np.ndarray, lag: int) -> SupervisedMatrix:
    """Build sliding windows of `lag` values followed by their next value.

    A series of length n yields n - lag rows; each row's inputs are ordered
    oldest first, so the value immediately before the target sits in the last
    column.
    """
    values = np.asarray(values, dtype=float)
    if lag < 1:
        raise ValueError(f"lag must be >= 1, got {lag}")
    if len(values) <= lag:
        raise LengthError(f"need more than lag={lag} values, got {len(values)}")
    rows = len(values) - lag
    idx = np.arange(lag)[None, :] + np.arange(rows)[:, None]
    return SupervisedMatrix(inputs=values[idx], targets=values[lag:])


def adf_test(values: np.ndarray) -> AdfResult:
    """Lag-0 Dickey-Fuller test with a constant term.

    Regresses the first difference on a constant plus the lagged level; the
    t-ratio of the level coefficient is compared against fixed asymptotic
    critical values, deciding stationarity at the 5% level.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < 20:
        raise LengthError(f"need at least 20 observations, got {len(values)}")
    delta = values[1:] - values[:-1]
    lagged = values[:-1]
    if np.ptp(lagged) == 0.0:
        raise SingularDesignError("series is constant; unit-root regression is degenerate")
    design = np.column_stack([np.ones(len(lagged)), lagged])
    beta, _, se = solve_with_standard_errors(design, delta)
    statistic = float(beta[1] / se[1])
    return AdfResult(
        statistic=statistic,
        critical_values=dict(ADF_CRITICAL_VALUES),
        stationary=statistic < ADF_CRITICAL_VALUES["5%"],
        nobs=len(delta),
    )
