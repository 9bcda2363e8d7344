"""Bundled synthetic panel and generators for oracle test series.

The shipped fixture (data/synthetic_panel.csv) is fully fictional: eight
made-up regions, 172 days of integer case counts, one missing value. The
length is a deliberate budget: a full default sweep visits 12 windows per
region, so the whole panel stays tractable for the seeded acceptance run.
Every number is reproducible from `generate_panel_text` with the default
seed, and a test pins the checked-in file to the generator's output.

Each region mixes three ingredients on top of a base level:
  - epidemic-like waves of varying steepness (Gaussian bumps in log space;
    broad waves give smooth, locally linear stretches, sharp waves give
    strongly curved onsets),
  - a fixed multiplicative day-of-week profile, which a 7-day trailing mean
    cancels to first order,
  - a slowly drifting near-weekly oscillation whose period is detuned from 7
    days, so smoothing attenuates but cannot cancel it; the surviving
    component gives the differenced data a strong lag-7 signature,
  - Poisson observation noise.
"""

from __future__ import annotations

import datetime as dt
import io

import numpy as np

from .ingest import TimeSeries
from .nn import DenseParams, LstmRegressor, TrainConfig, init_regressor, predict as nn_predict

REGION_NAMES = (
    "Ashford",
    "Brookfield",
    "Caldera",
    "Dunmore",
    "Eastvale",
    "Foxhill",
    "Greenbank",
    "Harlow",
)

DEFAULT_SEED = 74
PANEL_START = dt.date(2021, 1, 4)
PANEL_DAYS = 172
# one raw cell left blank: (region, day offset); alignment drops that date
MISSING_CELL = ("Caldera", 90)

# fixed weekday profile (Mon..Sun), mean zero: weekend reporting dips
_WEEKDAY = np.array([0.04, 0.10, 0.14, 0.12, 0.02, -0.12, -0.30])
_WEEKDAY -= _WEEKDAY.mean()

# per-region recipe: base level, waves as (center, width, log-amplitude),
# strength of the fixed weekday effect, and amplitude/period of the drifting
# near-weekly oscillation
_PROFILES: dict[str, dict] = {
    "Ashford": {
        "base": 160.0,
        "waves": [(45, 38, 1.0), (125, 30, 0.9)],
        "weekday": 1.0,
        "drift_amp": 0.040,
        "drift_period": 130.0,
    },
    "Brookfield": {
        "base": 120.0,
        "waves": [(40, 10, 1.3), (105, 9, 1.2), (155, 11, 1.0)],
        "weekday": 1.1,
        "drift_amp": 0.030,
        "drift_period": 115.0,
    },
    "Caldera": {
        "base": 140.0,
        "waves": [(35, 30, 0.9), (110, 10, 1.3)],
        "weekday": 0.9,
        "drift_amp": 0.045,
        "drift_period": 140.0,
    },
    "Dunmore": {
        "base": 420.0,
        "waves": [(55, 45, 0.55), (140, 40, 0.6)],
        "weekday": 1.0,
        "drift_amp": 0.070,
        "drift_period": 150.0,
    },
    "Eastvale": {
        "base": 180.0,
        "waves": [(30, 9, 1.2), (95, 35, 0.9), (158, 10, 1.1)],
        "weekday": 1.2,
        "drift_amp": 0.035,
        "drift_period": 125.0,
    },
    "Foxhill": {
        "base": 70.0,
        "waves": [(50, 28, 1.0), (120, 11, 1.1)],
        "weekday": 0.8,
        "drift_amp": 0.030,
        "drift_period": 110.0,
    },
    "Greenbank": {
        "base": 320.0,
        "waves": [(60, 40, 0.6), (140, 38, 0.65)],
        "weekday": 1.0,
        "drift_amp": 0.065,
        "drift_period": 160.0,
    },
    "Harlow": {
        "base": 100.0,
        "waves": [(35, 11, 1.2), (100, 32, 0.8), (150, 10, 1.1)],
        "weekday": 1.1,
        "drift_amp": 0.040,
        "drift_period": 118.0,
    },
}


def region_intensity(region: str, days: int = PANEL_DAYS) -> np.ndarray:
    """Noise-free expected case counts for one region."""
    profile = _PROFILES[region]
    t = np.arange(days, dtype=float)
    log_level = np.log(profile["base"]) * np.ones(days)
    for center, width, amp in profile["waves"]:
        log_level += amp * np.exp(-0.5 * ((t - center) / width) ** 2)
    weekday = 1.0 + profile["weekday"] * _WEEKDAY[np.arange(days) % 7]
    drift_phase = 2.0 * np.pi * t / profile["drift_period"]
    drifting = 1.0 + profile["drift_amp"] * np.sin(2.0 * np.pi * t / 7.0 + drift_phase)
    return np.exp(log_level) * weekday * drifting


def generate_panel_text(seed: int = DEFAULT_SEED) -> str:
    """Deterministic CSV text of the bundled panel (date, area, cases)."""
    rng = np.random.default_rng(seed)
    counts = {}
    for region in REGION_NAMES:
        counts[region] = rng.poisson(region_intensity(region)).astype(int)
    buffer = io.StringIO()
    buffer.write("date,area,cases\n")
    for day in range(PANEL_DAYS):
        date = PANEL_START + dt.timedelta(days=day)
        for region in REGION_NAMES:
            if (region, day) == MISSING_CELL:
                cell = ""
            else:
                cell = str(int(counts[region][day]))
            buffer.write(f"{date.isoformat()},{region},{cell}\n")
    return buffer.getvalue()


def write_panel(path, seed: int = DEFAULT_SEED) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(generate_panel_text(seed))


# ---------------------------------------------------------------------------
# synthetic series for oracle tests and targeted trials


def ar_series(
    coefficients: np.ndarray,
    n: int,
    seed: int = 0,
    intercept: float = 0.0,
    noise_sd: float = 0.0,
    burn_in: int = 200,
) -> np.ndarray:
    """Simulate an AR process; coefficients in lag order (index 0 is lag 1)."""
    coefficients = np.asarray(coefficients, dtype=float)
    p = coefficients.size
    rng = np.random.default_rng(seed)
    total = n + burn_in
    values = np.zeros(total + p)
    values[:p] = rng.normal(0.0, max(noise_sd, 0.1), p)
    for t in range(p, total + p):
        window_newest_first = values[t - p : t][::-1]
        values[t] = intercept + coefficients @ window_newest_first
        if noise_sd > 0.0:
            values[t] += rng.normal(0.0, noise_sd)
    return values[p + burn_in :]


def lstm_series(
    n: int,
    seed: int = 0,
    lag: int = 7,
    noise_sd: float = 0.03,
    gain: float = 4.0,
) -> np.ndarray:
    """A sequence generated by a randomly initialized LSTM rolled forward.

    The init weights are scaled up so the gates leave their near-linear
    region; the result is a genuinely nonlinear autoregression that a linear
    model cannot capture, perturbed by small Gaussian noise.
    """
    config = TrainConfig(seed=seed, hidden=1, layers=1)
    model = init_regressor(config)
    for layer in model.layers:
        layer.w *= gain
        layer.u *= gain
    model = LstmRegressor(model.layers, DenseParams(model.dense.weight * gain, model.dense.bias))
    rng = np.random.default_rng(seed)
    window = rng.uniform(-0.5, 0.5, lag)
    out = np.empty(n)
    for t in range(n):
        value = nn_predict(model, window) + rng.normal(0.0, noise_sd)
        out[t] = value
        window = np.concatenate([window[1:], [value]])
    return out


def series_from_changes(
    changes: np.ndarray,
    region: str = "synthetic",
    level: float = 500.0,
    start: dt.date = dt.date(2022, 1, 1),
) -> TimeSeries:
    """Integrate a change sequence into a dated level series.

    The result has len(changes) + 1 observations and plays the role of an
    already-smoothed series, so it can feed a trial directly.
    """
    changes = np.asarray(changes, dtype=float)
    values = level + np.concatenate([[0.0], np.cumsum(changes)])
    dates = tuple(start + dt.timedelta(days=i) for i in range(values.size))
    return TimeSeries(region, dates, values)


def weekly_momentum_changes(n: int, seed: int = 7, saw_amp: float = 0.8) -> np.ndarray:
    """Changes dominated by linear structure: weekday sawtooth plus momentum.

    The sawtooth repeats exactly every 7 steps and is rich in harmonics, so an
    order-7 linear fit captures it fully; the AR(1) momentum term adds the
    rest. Data like this rewards the linear branch of a combined model.
    """
    profile = np.array([1.0, -0.35, -0.2, -0.1, -0.05, -0.15, -0.15])
    saw = np.tile(profile, n // 7 + 1)[:n]
    rng = np.random.default_rng(seed)
    momentum = np.zeros(n)
    for i in range(1, n):
        momentum[i] = 0.9 * momentum[i - 1] + rng.normal(0.0, 0.1)
    return saw_amp * saw + momentum


def white_noise_changes(n: int, seed: int = 11, sd: float = 0.3) -> np.ndarray:
    """Changes with no learnable structure; neither model branch can win."""
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, sd, size=n)


def chaotic_changes(n: int, r: float = 3.9, x0: float = 0.3711) -> np.ndarray:
    """Deterministic logistic-map changes, centered.

    The next change is a fixed nonlinear (quadratic) function of the current
    one, which a linear fit of any order cannot represent; given enough
    training steps a nonlinear model learns it almost exactly.
    """
    x = np.empty(n + 1)
    x[0] = x0
    for i in range(1, n + 1):
        x[i] = r * x[i - 1] * (1.0 - x[i - 1])
    return x[1:] - 0.5
