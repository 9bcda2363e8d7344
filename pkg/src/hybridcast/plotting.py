"""Deterministic SVG figures for forecasts and branch decompositions.

Plots are optional everywhere (the evaluation stack never imports this
module); the CLI calls in here only when asked for figures. Output is pinned
down for byte-reproducibility: the Agg backend, a fixed svg.hashsalt, and a
cleared Date field in the SVG metadata.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "hybridcast"

import matplotlib.dates as mdates
import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ModelKind, TrialResult
from .hybrid import Decomposition

KIND_COLORS = {
    ModelKind.AR: "#1f77b4",
    ModelKind.LSTM: "#ff7f0e",
    ModelKind.LSTM_DOUBLE: "#2ca02c",
    ModelKind.HYBRID: "#d62728",
}

TRUTH_COLOR = "#222222"


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def save_trial_plot(path, results: Sequence[TrialResult]) -> None:
    """Plot truth against each model's seed-mean forecast for one trial.

    All results must come from the same trial. Models trained across several
    seeds get a shaded band of +-2 standard errors of the seed mean; the
    band artists carry gid "band-<kind>" so tests can find them.
    """
    if not results:
        raise ValueError("no results to plot")
    first = results[0]
    dates = list(first.test_dates)
    fig, ax = plt.subplots(figsize=(9.0, 4.5))
    ax.plot(dates, first.truth, color=TRUTH_COLOR, linewidth=1.8, label="observed")
    for result in results:
        color = KIND_COLORS[result.model_kind]
        ax.plot(
            dates,
            result.mean_prediction,
            color=color,
            linewidth=1.3,
            linestyle="--",
            label=result.model_kind.label,
        )
        n_ok = len(result.seeds) - len(result.failed_seeds)
        if result.model_kind.is_neural and n_ok > 1:
            sem = result.sd_prediction / np.sqrt(n_ok)
            band = ax.fill_between(
                dates,
                result.mean_prediction - 2.0 * sem,
                result.mean_prediction + 2.0 * sem,
                color=color,
                alpha=0.2,
                linewidth=0,
            )
            band.set_gid(f"band-{result.model_kind.value}")
    ax.set_title(f"{first.spec.region}, trial starting {first.start_date.isoformat()}")
    ax.set_ylabel("smoothed daily cases")
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%Y-%m-%d"))
    fig.autofmt_xdate(rotation=30)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def save_decomposition_plot(path, decomposition: Decomposition, targets: np.ndarray, title: str = "") -> None:
    """Plot branch contributions against the target on the normalized scale.

    Contributions live on the scaled-difference scale the model trains on,
    which is where "how much does each branch carry" is answerable; the sum
    of the two contribution lines is the prediction line exactly.
    """
    targets = np.asarray(targets, dtype=float)
    rows = np.arange(targets.size)
    fig, ax = plt.subplots(figsize=(9.0, 4.5))
    ax.plot(rows, targets, color=TRUTH_COLOR, linewidth=1.8, label="target")
    ax.plot(rows, decomposition.prediction, color=KIND_COLORS[ModelKind.HYBRID], linewidth=1.3, linestyle="--", label="prediction")
    ax.plot(rows, decomposition.ar_contribution, color=KIND_COLORS[ModelKind.AR], linewidth=1.1, label="AR contribution")
    ax.plot(rows, decomposition.lstm_contribution, color=KIND_COLORS[ModelKind.LSTM], linewidth=1.1, label="LSTM contribution")
    ax.axhline(0.0, color="#999999", linewidth=0.6)
    label = title or f"branch contributions, alpha = {decomposition.alpha:.3f}"
    ax.set_title(label)
    ax.set_xlabel("test row")
    ax.set_ylabel("scaled change")
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    _save(fig, path)
