"""Trial construction, seeded multi-run execution, and MAPE aggregation.

A trial takes a fixed-length window of the smoothed series, differences it
once, scales by training-split statistics, and turns both splits into lag
windows. Models predict scaled differences; predictions are mapped back to
the level scale against the true previous observation (one step ahead) and
scored by MAPE against the smoothed truth.

Neural kinds run once per seed. All (trial, seed) pairs of one region and
model kind train together through the lane-vectorized kernel, which is what
keeps full sweeps fast on a single core; lanes never interact, so results
match training each pair on its own.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import time
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import hybrid as hybrid_mod
from . import nn
from .ar import ArModel, fit_ols, predict_matrix
from .errors import (
    AlignmentError,
    ComputationError,
    DataFormatError,
    DegenerateRangeError,
    LengthError,
    SingularDesignError,
    StationarityError,
)
from .ingest import AlignedPanel, TimeSeries
from .preprocess import (
    ScalerParams,
    SupervisedMatrix,
    adf_test,
    difference,
    fit_scaler,
    reshape_supervised,
    scale,
    smooth_series,
    unscale,
)


class ModelKind(Enum):
    """The four model variants compared by the evaluation harness."""

    AR = "ar"
    LSTM = "lstm"
    LSTM_DOUBLE = "lstm2"
    HYBRID = "hybrid"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def layers(self) -> int:
        return 2 if self is ModelKind.LSTM_DOUBLE else 1

    @property
    def is_neural(self) -> bool:
        return self is not ModelKind.AR

    @classmethod
    def parse(cls, token: str) -> "ModelKind":
        try:
            return cls(token.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in KIND_ORDER)
            raise DataFormatError(f"unknown model kind {token!r}; valid kinds: {valid}") from None


_LABELS = {
    ModelKind.AR: "AR",
    ModelKind.LSTM: "LSTM",
    ModelKind.LSTM_DOUBLE: "LSTM (Double)",
    ModelKind.HYBRID: "Hybrid",
}

# canonical column order in every table
KIND_ORDER = (ModelKind.AR, ModelKind.LSTM, ModelKind.LSTM_DOUBLE, ModelKind.HYBRID)


def parse_kinds(tokens: str | Sequence[str]) -> list[ModelKind]:
    """Parse a comma-separated string or token sequence into canonical order."""
    if isinstance(tokens, str):
        tokens = [t for t in tokens.split(",") if t.strip()]
    kinds = {ModelKind.parse(t) for t in tokens}
    if not kinds:
        raise DataFormatError("no model kinds requested")
    return [k for k in KIND_ORDER if k in kinds]


@dataclass(frozen=True)
class TrialSpec:
    """One evaluation window: where it starts and how it splits."""

    region: str
    start_index: int
    trial_len: int = 88
    train_len: int = 63
    lag: int = 7
    step: int = 7

    def __post_init__(self):
        if self.start_index < 0:
            raise LengthError(f"start_index must be >= 0, got {self.start_index}")
        if self.lag < 1:
            raise LengthError(f"lag must be >= 1, got {self.lag}")
        if self.step < 1:
            raise LengthError(f"step must be >= 1, got {self.step}")
        if self.train_len < self.lag + 2:
            raise LengthError(
                f"train_len {self.train_len} leaves no training rows at lag {self.lag}"
            )
        if self.trial_len < self.train_len + self.lag + 1:
            raise LengthError(
                f"trial_len {self.trial_len} leaves no test rows "
                f"(train_len {self.train_len}, lag {self.lag})"
            )

    @property
    def n_diffs(self) -> int:
        return self.trial_len - 1

    @property
    def train_diffs(self) -> int:
        return self.train_len - 1

    @property
    def test_diffs(self) -> int:
        return self.trial_len - self.train_len

    @property
    def train_rows(self) -> int:
        return self.train_len - 1 - self.lag

    @property
    def test_rows(self) -> int:
        return self.trial_len - self.train_len - self.lag

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def slice_trials(
    series_len: int,
    region: str = "",
    trial_len: int = 88,
    train_len: int = 63,
    lag: int = 7,
    step: int = 7,
) -> list[TrialSpec]:
    """Non-adaptive window starts 0, step, 2*step, ... while a full trial fits.

    A series shorter than one trial yields an empty list with a warning.
    """
    if series_len < trial_len:
        warnings.warn(
            f"series length {series_len} is shorter than trial length {trial_len}; no trials",
            stacklevel=2,
        )
        return []
    return [
        TrialSpec(region, start, trial_len, train_len, lag, step)
        for start in range(0, series_len - trial_len + 1, step)
    ]


def mape(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Mean absolute percentage error, in percent."""
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape or predicted.ndim != 1:
        raise LengthError(f"shape mismatch: predicted {predicted.shape} vs truth {truth.shape}")
    if predicted.size == 0:
        raise LengthError("MAPE of empty sequences is undefined")
    zeros = np.nonzero(truth == 0.0)[0]
    if zeros.size:
        raise DegenerateRangeError(f"truth[{zeros[0]}] is zero; MAPE is undefined")
    return float(100.0 * np.mean(np.abs(predicted - truth) / np.abs(truth)))


# ---------------------------------------------------------------------------
# trial preparation


@dataclass(frozen=True)
class TrialFrames:
    """Everything a model needs for one trial, already split and scaled."""

    spec: TrialSpec
    values: np.ndarray  # (trial_len,) smoothed, level scale
    dates: tuple
    scaler: ScalerParams
    train: SupervisedMatrix  # scaled differences
    test: SupervisedMatrix  # scaled differences
    prev_true: np.ndarray  # (test_rows,) level value preceding each target
    truth: np.ndarray  # (test_rows,) level-scale targets
    test_dates: tuple
    adf_statistic: float | None
    stationary: bool | None


def prepare_trial(series: TimeSeries, spec: TrialSpec) -> TrialFrames:
    """Difference, split, scale and window one trial of a smoothed series.

    The scaler is fit on the training differences only. Test windows are
    built purely from test-split differences, so no training value leaks
    into a test input. The stationarity advisory comes from the unit-root
    test on the training differences (None when it cannot run).
    """
    if series.region != spec.region:
        raise AlignmentError(f"spec region {spec.region!r} does not match series {series.region!r}")
    stop = spec.start_index + spec.trial_len
    if stop > len(series):
        raise LengthError(
            f"trial needs observations {spec.start_index}..{stop} "
            f"but series has {len(series)}"
        )
    values = series.values[spec.start_index : stop]
    dates = series.dates[spec.start_index : stop]
    diffs = difference(values)
    train_diffs = diffs[: spec.train_diffs]
    test_diffs = diffs[spec.train_diffs :]
    scaler = fit_scaler(train_diffs)
    train = reshape_supervised(scale(train_diffs, scaler), spec.lag)
    test = reshape_supervised(scale(test_diffs, scaler), spec.lag)
    prev_true = values[spec.train_len + spec.lag - 1 : spec.trial_len - 1]
    truth = values[spec.train_len + spec.lag : spec.trial_len]
    try:
        adf = adf_test(train_diffs)
        statistic, stationary = adf.statistic, adf.stationary
    except (LengthError, SingularDesignError):
        statistic, stationary = None, None
    return TrialFrames(
        spec=spec,
        values=values,
        dates=dates,
        scaler=scaler,
        train=train,
        test=test,
        prev_true=prev_true,
        truth=truth,
        test_dates=dates[spec.train_len + spec.lag : spec.trial_len],
        adf_statistic=statistic,
        stationary=stationary,
    )


# ---------------------------------------------------------------------------
# trial results


@dataclass
class TrialResult:
    """Per-seed scores and reconstructed predictions for one trial and kind.

    `seeds` lists the seeds that finished; `failed_seeds` the ones whose
    training diverged or produced non-finite predictions. Standard deviations
    are population (ddof=0) across surviving seeds. Predictions are defined
    as prev_true + predicted_changes, so that identity holds exactly.
    """

    spec: TrialSpec
    model_kind: ModelKind
    seeds: list[int]
    failed_seeds: list[int]
    per_seed_mape: np.ndarray
    mean_mape: float
    sd_mape: float
    predictions: np.ndarray  # (n_ok, test_rows), level scale
    predicted_changes: np.ndarray  # (n_ok, test_rows), unscaled differences
    mean_prediction: np.ndarray
    sd_prediction: np.ndarray
    truth: np.ndarray
    prev_true: np.ndarray
    start_date: dt.date
    test_dates: tuple
    valid: bool
    stationary: bool | None
    adf_statistic: float | None
    alpha: float | None = None
    per_seed_alpha: np.ndarray | None = None
    hybrid_intercept: float | None = None
    hybrid_coefficients: np.ndarray | None = None  # lag order, seed mean
    ar_model: ArModel | None = None

    def to_dict(self) -> dict:
        payload = {
            "spec": self.spec.to_dict(),
            "model_kind": self.model_kind.value,
            "model_label": self.model_kind.label,
            "seeds": list(self.seeds),
            "failed_seeds": list(self.failed_seeds),
            "per_seed_mape": [float(v) for v in self.per_seed_mape],
            "mean_mape": float(self.mean_mape),
            "sd_mape": float(self.sd_mape),
            "sd_convention": "population (ddof=0) across seeds",
            "predictions": [[float(v) for v in row] for row in self.predictions],
            "predicted_changes": [[float(v) for v in row] for row in self.predicted_changes],
            "mean_prediction": [float(v) for v in self.mean_prediction],
            "sd_prediction": [float(v) for v in self.sd_prediction],
            "truth": [float(v) for v in self.truth],
            "prev_true": [float(v) for v in self.prev_true],
            "start_date": self.start_date.isoformat(),
            "test_dates": [d.isoformat() for d in self.test_dates],
            "valid": self.valid,
            "stationary": self.stationary,
            "adf_statistic": self.adf_statistic,
        }
        if self.alpha is not None:
            payload["alpha"] = float(self.alpha)
        if self.per_seed_alpha is not None:
            payload["per_seed_alpha"] = [float(v) for v in self.per_seed_alpha]
        if self.hybrid_intercept is not None:
            payload["hybrid_intercept"] = float(self.hybrid_intercept)
        if self.hybrid_coefficients is not None:
            payload["hybrid_coefficients"] = [float(v) for v in self.hybrid_coefficients]
        if self.ar_model is not None:
            payload["ar_model"] = self.ar_model.to_dict()
        return payload


@dataclass(frozen=True)
class SweepFailure:
    """One trial that could not be evaluated, with the reason."""

    region: str
    start_index: int
    kind: str | None  # None when the failure precedes model fitting
    error: str


@dataclass(frozen=True)
class StationarityAdvisory:
    """A differenced training window the unit-root test did not call stationary."""

    region: str
    start_index: int
    statistic: float | None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _finite_rows(arr: np.ndarray) -> np.ndarray:
    return np.all(np.isfinite(arr), axis=1)


def _assemble_result(
    frames: TrialFrames,
    kind: ModelKind,
    seeds: Sequence[int],
    ok_index: np.ndarray,
    failed_index: np.ndarray,
    pred_scaled: np.ndarray,
    alpha_logits: np.ndarray | None = None,
    ar_w_cols: np.ndarray | None = None,
    ar_b: np.ndarray | None = None,
    ar_model: ArModel | None = None,
) -> TrialResult:
    """Score surviving seeds of one trial and fold them into a TrialResult."""
    seeds = list(seeds)
    changes = unscale(pred_scaled[ok_index], frames.scaler)
    predictions = frames.prev_true[None, :] + changes
    finite = _finite_rows(predictions)
    if not np.all(finite):
        bad = ok_index[~finite]
        failed_index = np.sort(np.concatenate([failed_index, bad]))
        ok_index = ok_index[finite]
        changes = changes[finite]
        predictions = predictions[finite]
    n_ok = len(ok_index)
    if kind is ModelKind.AR and n_ok:
        # one deterministic fit replicated per seed; exact zero spread
        single = mape(predictions[0], frames.truth)
        per_seed = np.full(n_ok, single)
        mean_m = single
        sd_m = 0.0
        mean_p = predictions[0].copy()
        sd_p = np.zeros_like(mean_p)
    elif n_ok:
        per_seed = np.array([mape(row, frames.truth) for row in predictions])
        mean_m = float(per_seed.mean())
        sd_m = float(per_seed.std(ddof=0))
        mean_p = predictions.mean(axis=0)
        sd_p = predictions.std(axis=0, ddof=0)
    else:
        per_seed = np.zeros(0)
        mean_m = float("nan")
        sd_m = float("nan")
        mean_p = np.full(frames.spec.test_rows, np.nan)
        sd_p = np.full(frames.spec.test_rows, np.nan)
    result = TrialResult(
        spec=frames.spec,
        model_kind=kind,
        seeds=[seeds[i] for i in ok_index],
        failed_seeds=[seeds[i] for i in failed_index],
        per_seed_mape=per_seed,
        mean_mape=mean_m,
        sd_mape=sd_m,
        predictions=predictions,
        predicted_changes=changes,
        mean_prediction=mean_p,
        sd_prediction=sd_p,
        truth=frames.truth.copy(),
        prev_true=frames.prev_true.copy(),
        start_date=frames.dates[0],
        test_dates=frames.test_dates,
        valid=len(failed_index) <= 0.2 * len(seeds),
        stationary=frames.stationary,
        adf_statistic=frames.adf_statistic,
        ar_model=ar_model,
    )
    if alpha_logits is not None:
        al = nn.sigmoid(alpha_logits[ok_index])
        result.per_seed_alpha = al
        result.alpha = float(al.mean()) if n_ok else None
    if ar_w_cols is not None and n_ok:
        result.hybrid_coefficients = ar_w_cols[ok_index].mean(axis=0)[::-1].copy()
        result.hybrid_intercept = float(ar_b[ok_index].mean())
    return result


def _evaluate_frames(
    frames_list: Sequence[TrialFrames],
    kind: ModelKind,
    seeds: Sequence[int],
    epochs: int,
    hidden: int,
    adam: nn.AdamConfig,
    warm_start_ar: bool,
) -> tuple[list[TrialResult], list[SweepFailure]]:
    """Evaluate one model kind over many trials, all seeds fused into lanes.

    Lane order is trial-major with seeds varying fastest, so lane t*S+i is
    (trial t, seed i). Lanes are independent, which makes the fused run equal
    to evaluating every trial on its own.
    """
    seeds = list(seeds)
    if not seeds:
        raise LengthError("need at least one seed")
    results: list[TrialResult] = []
    failures: list[SweepFailure] = []

    if kind is ModelKind.AR:
        all_idx = np.arange(len(seeds))
        none_idx = np.arange(0)
        for frames in frames_list:
            try:
                model = fit_ols(frames.train)
                pred_scaled = predict_matrix(model, frames.test.inputs)
            except ComputationError as exc:
                failures.append(
                    SweepFailure(frames.spec.region, frames.spec.start_index, kind.value, str(exc))
                )
                continue
            pred_all = np.broadcast_to(pred_scaled, (len(seeds), pred_scaled.size))
            results.append(
                _assemble_result(frames, kind, seeds, all_idx, none_idx, pred_all, ar_model=model)
            )
        return results, failures

    config = nn.TrainConfig(epochs=epochs, hidden=hidden, layers=kind.layers, seed=seeds[0])
    lag = frames_list[0].spec.lag
    is_hybrid = kind is ModelKind.HYBRID

    usable: list[TrialFrames] = []
    warm_models: list[ArModel | None] = []
    for frames in frames_list:
        if is_hybrid and warm_start_ar:
            try:
                warm_models.append(fit_ols(frames.train))
            except ComputationError as exc:
                failures.append(
                    SweepFailure(
                        frames.spec.region,
                        frames.spec.start_index,
                        kind.value,
                        f"warm start failed: {exc}",
                    )
                )
                continue
        else:
            warm_models.append(None)
        usable.append(frames)
    if not usable:
        return results, failures

    n_trials, n_seeds = len(usable), len(seeds)
    lanes = n_trials * n_seeds
    if is_hybrid:
        layout = hybrid_mod.hybrid_layout(config.layers, hidden, lag)
        seed_rows = [
            layout.pack(
                hybrid_mod.hybrid_leaves(
                    hybrid_mod.init_hybrid(lag, dataclasses.replace(config, seed=s))
                )
            )
            for s in seeds
        ]
        kernel: nn.LaneKernel = hybrid_mod.HybridLaneKernel(
            layout, lanes, lag, hidden, config.layers
        )
    else:
        layout = nn.regressor_layout(config.layers, hidden)
        seed_rows = [
            layout.pack(
                nn.regressor_leaves(nn.init_regressor(dataclasses.replace(config, seed=s)))
            )
            for s in seeds
        ]
        kernel = nn.LaneKernel(layout, lanes, lag, hidden, config.layers)
    flat = np.tile(np.stack(seed_rows), (n_trials, 1))

    views = layout.views(flat)
    if is_hybrid and warm_start_ar:
        for t, warm in enumerate(warm_models):
            rows = slice(t * n_seeds, (t + 1) * n_seeds)
            views["ar.w"][rows] = warm.coefficients[::-1]
            views["ar.b"][rows] = warm.intercept

    train_x = np.repeat(np.stack([f.train.inputs for f in usable]), n_seeds, axis=0)
    train_y = np.repeat(np.stack([f.train.targets for f in usable]), n_seeds, axis=0)
    alpha_view = views["alpha"] if is_hybrid else None
    outcome = nn.train_lanes(kernel, flat, train_x, train_y, config, adam, None, alpha_view)

    test_x = np.repeat(np.stack([f.test.inputs for f in usable]), n_seeds, axis=0)
    pred_scaled = nn.predict_lanes(kernel, outcome.flat, test_x)

    final_views = layout.views(outcome.flat)
    for t, frames in enumerate(usable):
        lane0 = t * n_seeds
        failed_local = sorted(i - lane0 for i in outcome.failed if lane0 <= i < lane0 + n_seeds)
        failed_index = np.array(failed_local, dtype=int)
        ok_index = np.array([i for i in range(n_seeds) if i not in set(failed_local)], dtype=int)
        block = slice(lane0, lane0 + n_seeds)
        try:
            results.append(
                _assemble_result(
                    frames,
                    kind,
                    seeds,
                    ok_index,
                    failed_index,
                    pred_scaled[block],
                    alpha_logits=final_views["alpha"][block] if is_hybrid else None,
                    ar_w_cols=final_views["ar.w"][block] if is_hybrid else None,
                    ar_b=final_views["ar.b"][block] if is_hybrid else None,
                )
            )
        except ComputationError as exc:
            failures.append(
                SweepFailure(frames.spec.region, frames.spec.start_index, kind.value, str(exc))
            )
    return results, failures


def run_trial(
    series: TimeSeries,
    spec: TrialSpec,
    model_kind: ModelKind,
    seeds: Sequence[int],
    epochs: int = 100,
    hidden: int = 1,
    adam: nn.AdamConfig | None = None,
    warm_start_ar: bool = False,
    strict_stationarity: bool = False,
) -> TrialResult:
    """Run one trial of an already-smoothed series under one model kind.

    AR fits once and replicates its score across the requested seeds; neural
    kinds train once per seed. Divergent seeds are excluded from aggregates
    and listed in failed_seeds; a trial keeps `valid=True` while at most 20%
    of its seeds fail.
    """
    adam = adam or nn.AdamConfig()
    frames = prepare_trial(series, spec)
    if strict_stationarity and frames.stationary is False:
        raise StationarityError(
            f"differenced training window at {spec.region!r} start {spec.start_index} "
            f"is not stationary (statistic {frames.adf_statistic:.3f})"
        )
    results, failures = _evaluate_frames(
        [frames], model_kind, seeds, epochs, hidden, adam, warm_start_ar
    )
    if failures:
        raise ComputationError(failures[0].error)
    return results[0]


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    """Every trial result of a sweep plus failure and stationarity bookkeeping.

    `timings` maps model-kind tokens to training wall seconds; it is log-only
    context and deliberately left out of serialized outputs so re-runs stay
    byte-identical.
    """

    results: list[TrialResult]
    failures: list[SweepFailure]
    advisories: list[StationarityAdvisory]
    seeds: list[int]
    timings: dict[str, float] = dataclasses.field(default_factory=dict)

    def table(self) -> "SweepTable":
        return aggregate(self.results)


def run_sweep(
    panel: AlignedPanel,
    kinds: Sequence[ModelKind],
    seeds: Sequence[int],
    tau: int = 7,
    trial_len: int = 88,
    train_len: int = 63,
    lag: int = 7,
    step: int = 7,
    epochs: int = 100,
    hidden: int = 1,
    adam: nn.AdamConfig | None = None,
    warm_start_ar: bool = False,
    strict_stationarity: bool = False,
    regions: Sequence[str] | None = None,
    progress: Callable[[str], None] | None = None,
) -> SweepResult:
    """Evaluate every trial of every region under every requested kind.

    Smoothing happens here (tau-day trailing mean), then trials are sliced
    per region and all (trial, seed) pairs of each region and kind train as
    one fused lane batch. Individual trial failures are recorded and skipped;
    the sweep keeps going. Results are ordered by region, then kind in table
    order, then trial start.
    """
    adam = adam or nn.AdamConfig()
    kinds = [k for k in KIND_ORDER if k in set(kinds)]
    if not kinds:
        raise DataFormatError("no model kinds requested")
    seeds = list(seeds)
    region_names = list(regions) if regions is not None else list(panel.region_names)
    for name in region_names:
        if name not in panel.regions:
            known = ", ".join(panel.region_names)
            raise AlignmentError(f"unknown region {name!r}; panel has: {known}")

    results: list[TrialResult] = []
    failures: list[SweepFailure] = []
    advisories: list[StationarityAdvisory] = []
    timings: dict[str, float] = {k.value: 0.0 for k in kinds}
    note = progress or (lambda _msg: None)

    for name in region_names:
        smoothed = smooth_series(panel.regions[name], tau)
        specs = slice_trials(len(smoothed), name, trial_len, train_len, lag, step)
        frames_ok: list[TrialFrames] = []
        for spec in specs:
            try:
                frames = prepare_trial(smoothed, spec)
            except ComputationError as exc:
                failures.append(SweepFailure(name, spec.start_index, None, str(exc)))
                continue
            if frames.stationary is False:
                if strict_stationarity:
                    failures.append(
                        SweepFailure(
                            name,
                            spec.start_index,
                            None,
                            f"non-stationary training differences "
                            f"(statistic {frames.adf_statistic:.3f})",
                        )
                    )
                    continue
                advisories.append(
                    StationarityAdvisory(name, spec.start_index, frames.adf_statistic)
                )
            frames_ok.append(frames)
        if not frames_ok:
            continue
        for kind in kinds:
            began = time.perf_counter()
            kind_results, kind_failures = _evaluate_frames(
                frames_ok, kind, seeds, epochs, hidden, adam, warm_start_ar
            )
            elapsed = time.perf_counter() - began
            timings[kind.value] += elapsed
            results.extend(kind_results)
            failures.extend(kind_failures)
            note(
                f"[{name}] {kind.label}: {len(kind_results)} trials x {len(seeds)} seeds "
                f"in {elapsed:.1f}s"
            )
    return SweepResult(results, failures, advisories, seeds, timings)


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class SweepTable:
    """Region-by-model MAPE means with cross-trial standard deviations."""

    regions: list[str]
    kinds: list[ModelKind]
    means: np.ndarray  # (regions, kinds), NaN where no valid trial
    sds: np.ndarray  # population sd across trials
    counts: np.ndarray  # valid trial counts
    grand_means: np.ndarray  # (kinds,), mean of region means

    def summary_line(self) -> str:
        cells = ", ".join(
            f"{k.label} {g:.3f}%" for k, g in zip(self.kinds, self.grand_means)
        )
        return f"Grand mean MAPE: {cells}"

    def to_text(self) -> str:
        header = ["region"] + [k.label for k in self.kinds]
        rows = [header]
        for i, region in enumerate(self.regions):
            row = [region]
            for j in range(len(self.kinds)):
                if np.isnan(self.means[i, j]):
                    row.append("n/a")
                else:
                    row.append(f"{self.means[i, j]:.3f} ({self.sds[i, j]:.3f})")
            rows.append(row)
        grand = ["All regions"] + [
            "n/a" if np.isnan(g) else f"{g:.3f}" for g in self.grand_means
        ]
        rows.append(grand)
        widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        lines.append("")
        lines.append("cell = mean (sd) of per-trial mean MAPE %; sd is population (ddof=0) across trials")
        lines.append(self.summary_line())
        return "\n".join(lines) + "\n"

    def to_csv_text(self) -> str:
        header = ["region"]
        for k in self.kinds:
            header += [f"{k.label} mean", f"{k.label} sd", f"{k.label} trials"]
        lines = [",".join(header)]
        for i, region in enumerate(self.regions):
            row = [region]
            for j in range(len(self.kinds)):
                if np.isnan(self.means[i, j]):
                    row += ["", "", "0"]
                else:
                    row += [
                        f"{self.means[i, j]:.6f}",
                        f"{self.sds[i, j]:.6f}",
                        str(int(self.counts[i, j])),
                    ]
            lines.append(",".join(row))
        grand = ["All regions"]
        for j in range(len(self.kinds)):
            g = self.grand_means[j]
            grand += ["" if np.isnan(g) else f"{g:.6f}", "", str(int(self.counts[:, j].sum()))]
        lines.append(",".join(grand))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        per_region = {}
        for i, region in enumerate(self.regions):
            per_region[region] = {
                k.value: {
                    "mean_mape": None if np.isnan(self.means[i, j]) else float(self.means[i, j]),
                    "sd_mape": None if np.isnan(self.sds[i, j]) else float(self.sds[i, j]),
                    "trials": int(self.counts[i, j]),
                }
                for j, k in enumerate(self.kinds)
            }
        return {
            "sd_convention": "population (ddof=0) across per-trial mean MAPE",
            "regions": per_region,
            "grand_means": {
                k.value: None if np.isnan(self.grand_means[j]) else float(self.grand_means[j])
                for j, k in enumerate(self.kinds)
            },
        }


def aggregate(results: Sequence[TrialResult]) -> SweepTable:
    """Fold trial results into the region-by-model table plus grand means.

    Only valid trials with finite mean MAPE enter the averages. The grand
    mean weights regions equally (the mean of the per-region means); regions
    with no valid trial for a kind are left out of that kind's grand mean.
    Aggregation does not depend on the order of `results`.
    """
    results = list(results)
    if not results:
        raise LengthError("no trial results to aggregate")
    regions = sorted({r.spec.region for r in results})
    present = {r.model_kind for r in results}
    kinds = [k for k in KIND_ORDER if k in present]
    r_idx = {name: i for i, name in enumerate(regions)}
    k_idx = {kind: j for j, kind in enumerate(kinds)}
    cells: dict[tuple[int, int], list[float]] = {}
    for r in results:
        if r.valid and np.isfinite(r.mean_mape):
            cells.setdefault((r_idx[r.spec.region], k_idx[r.model_kind]), []).append(r.mean_mape)
    means = np.full((len(regions), len(kinds)), np.nan)
    sds = np.full((len(regions), len(kinds)), np.nan)
    counts = np.zeros((len(regions), len(kinds)), dtype=int)
    for (i, j), vals in cells.items():
        arr = np.array(vals)
        means[i, j] = arr.mean()
        sds[i, j] = arr.std(ddof=0)
        counts[i, j] = arr.size
    grand = np.full(len(kinds), np.nan)
    for j in range(len(kinds)):
        col = means[:, j]
        col = col[np.isfinite(col)]
        if col.size:
            grand[j] = col.mean()
    return SweepTable(regions, kinds, means, sds, counts, grand)


def traces_csv_text(results: Sequence[TrialResult]) -> str:
    """Per-day prediction traces: one row per region, trial and test day.

    Columns carry the truth and, per model kind present, the cross-seed mean
    and population sd of the reconstructed prediction. Full float precision,
    so the file is byte-stable across re-runs.
    """
    results = list(results)
    if not results:
        raise LengthError("no trial results to trace")
    present = {r.model_kind for r in results}
    kinds = [k for k in KIND_ORDER if k in present]
    grouped: dict[tuple[str, int], dict[ModelKind, TrialResult]] = {}
    order: list[tuple[str, int]] = []
    for r in results:
        key = (r.spec.region, r.spec.start_index)
        if key not in grouped:
            grouped[key] = {}
            order.append(key)
        grouped[key][r.model_kind] = r
    header = ["region", "trial_start_date", "day", "truth"]
    for k in kinds:
        header += [f"mean_{k.value}", f"sd_{k.value}"]
    lines = [",".join(header)]
    for key in sorted(order):
        by_kind = grouped[key]
        anchor = next(iter(by_kind.values()))
        for d in range(len(anchor.truth)):
            row = [
                key[0],
                anchor.start_date.isoformat(),
                anchor.test_dates[d].isoformat(),
                repr(float(anchor.truth[d])),
            ]
            for k in kinds:
                r = by_kind.get(k)
                if r is None or not np.isfinite(r.mean_prediction[d]):
                    row += ["", ""]
                else:
                    row += [repr(float(r.mean_prediction[d])), repr(float(r.sd_prediction[d]))]
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"
