"""Autoregressive baseline: closed-form OLS fit, prediction, BIC lag selection.

The model is Y_t = a0 + a1 Y_{t-1} + ... + ap Y_{t-p}. Coefficients are stored
in lag order (coefficients[0] multiplies Y_{t-1}), while supervised windows
store values oldest first, so prediction pairs the coefficient vector with the
reversed window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LengthError
from .linalg import solve_least_squares
from .preprocess import SupervisedMatrix, reshape_supervised


@dataclass
class ArModel:
    """Fitted AR(p): intercept plus one coefficient per lag."""

    intercept: float
    coefficients: np.ndarray  # coefficients[j-1] multiplies Y_{t-j}
    lag: int

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.lag,):
            raise DimensionError(
                f"expected {self.lag} coefficients, got shape {self.coefficients.shape}"
            )

    def to_dict(self) -> dict:
        return {
            "lag": self.lag,
            "intercept": self.intercept,
            "coefficients": [float(c) for c in self.coefficients],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ArModel":
        return cls(
            intercept=float(payload["intercept"]),
            coefficients=np.asarray(payload["coefficients"], dtype=float),
            lag=int(payload["lag"]),
        )


def fit_ols(data: SupervisedMatrix) -> ArModel:
    """Fit the AR coefficients by ordinary least squares (QR factorization)."""
    lag = data.lag
    if data.rows < lag + 2:
        raise LengthError(f"need at least lag+2={lag + 2} rows to fit, got {data.rows}")
    design = np.column_stack([np.ones(data.rows), data.inputs])
    beta, _ = solve_least_squares(design, data.targets)
    # design columns are oldest first; flip them into lag order
    return ArModel(intercept=float(beta[0]), coefficients=beta[1:][::-1], lag=lag)


def predict(model: ArModel, window: np.ndarray) -> float:
    """One-step prediction from a window ordered oldest first."""
    window = np.asarray(window, dtype=float)
    if window.shape != (model.lag,):
        raise DimensionError(f"expected window of shape ({model.lag},), got {window.shape}")
    return float(model.intercept + model.coefficients @ window[::-1])


def predict_matrix(model: ArModel, inputs: np.ndarray) -> np.ndarray:
    """Vectorized predict over supervised input rows (oldest first)."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != model.lag:
        raise DimensionError(f"expected (rows, {model.lag}) inputs, got {inputs.shape}")
    return model.intercept + inputs[:, ::-1] @ model.coefficients


def bic(model: ArModel, data: SupervisedMatrix) -> float:
    """n ln(RSS/n) + k ln(n) with k = lag + 1; constant terms omitted.

    A perfect fit (RSS == 0) returns -inf, which any comparison treats as the
    best attainable score.
    """
    if data.lag != model.lag:
        raise DimensionError(f"model lag {model.lag} vs data lag {data.lag}")
    resid = data.targets - predict_matrix(model, data.inputs)
    rss = float(resid @ resid)
    n = data.rows
    if rss == 0.0:
        return float("-inf")
    k = model.lag + 1
    return n * np.log(rss / n) + k * np.log(n)


def select_lag_bic(values: np.ndarray, max_lag: int) -> tuple[int, dict[int, float]]:
    """Pick the lag in 1..max_lag minimizing BIC; ties go to the smaller lag.

    Every candidate is scored on the same effective sample: rows are aligned
    to max_lag, and a lag-q model reads the most recent q columns of each
    window.
    """
    values = np.asarray(values, dtype=float)
    if max_lag < 1:
        raise ValueError(f"max_lag must be >= 1, got {max_lag}")
    full = reshape_supervised(values, max_lag)
    if full.rows < max_lag + 2:
        raise LengthError(
            f"need at least {2 * max_lag + 2} values to compare lags up to {max_lag}"
        )
    scores: dict[int, float] = {}
    best_lag = 0
    for q in range(1, max_lag + 1):
        sub = SupervisedMatrix(inputs=full.inputs[:, max_lag - q :], targets=full.targets)
        model = fit_ols(sub)
        scores[q] = bic(model, sub)
        if best_lag == 0 or scores[q] < scores[best_lag]:
            best_lag = q
    return best_lag, scores
