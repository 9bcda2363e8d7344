"""Additive hybrid of an AR layer and the LSTM, trained jointly end to end.

The prediction is

    yhat = alpha * (a0 + a1 Y_{t-1} + ... + ap Y_{t-p}) + (1 - alpha) * G(window)

where G is the LSTM regressor from the nn module and alpha = sigmoid(alpha_logit)
is itself trained, so the data decides how much weight the linear branch gets.
The logistic reparameterization keeps alpha strictly inside (0, 1); the logit
starts at 0 (alpha = 0.5, no preference).

Conventions: ar_coefficients are stored in lag order (index j-1 multiplies
Y_{t-j}), matching ArModel, while windows arrive oldest first. The lane kernel
stores the AR weights reversed (aligned with window columns) purely as an
internal layout detail; packing and unpacking flip them.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import nn
from .ar import ArModel, predict as ar_predict
from .errors import DimensionError, TrainingDivergenceError
from .nn import (
    AdamConfig,
    DenseParams,
    LstmParams,
    LstmRegressor,
    TrainConfig,
    sigmoid,
)
from .preprocess import SupervisedMatrix


@dataclass
class HybridModel:
    """Jointly trained AR + LSTM combination."""

    ar_intercept: float
    ar_coefficients: np.ndarray  # lag order, on the scaled differenced space
    lstm: list[LstmParams]
    dense: DenseParams
    alpha_logit: float
    lag: int
    train_config: TrainConfig | None = None

    def __post_init__(self):
        self.ar_coefficients = np.asarray(self.ar_coefficients, dtype=float)
        if self.ar_coefficients.shape != (self.lag,):
            raise DimensionError(
                f"expected {self.lag} AR coefficients, got shape {self.ar_coefficients.shape}"
            )

    @property
    def alpha(self) -> float:
        return float(sigmoid(self.alpha_logit))

    def ar_model(self) -> ArModel:
        """The AR branch as a standalone model."""
        return ArModel(self.ar_intercept, self.ar_coefficients, self.lag)

    def regressor(self) -> LstmRegressor:
        """The LSTM branch as a standalone regressor."""
        return LstmRegressor(layers=self.lstm, dense=self.dense)

    def to_dict(self) -> dict:
        payload = {
            "kind": "hybrid",
            "lag": self.lag,
            "alpha_logit": self.alpha_logit,
            "alpha": self.alpha,
            "ar": self.ar_model().to_dict(),
            "lstm": self.regressor().to_dict(),
            "coefficient_space": "scaled differenced",
        }
        if self.train_config is not None:
            payload["train_config"] = dataclasses.asdict(self.train_config)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "HybridModel":
        ar = ArModel.from_dict(payload["ar"])
        reg = LstmRegressor.from_dict(payload["lstm"])
        config = None
        if "train_config" in payload:
            config = TrainConfig(**payload["train_config"])
        return cls(
            ar_intercept=ar.intercept,
            ar_coefficients=ar.coefficients,
            lstm=reg.layers,
            dense=reg.dense,
            alpha_logit=float(payload["alpha_logit"]),
            lag=int(payload["lag"]),
            train_config=config,
        )


@dataclass(frozen=True)
class HybridComponents:
    """Branch outputs next to their mixed contributions for one window."""

    ar_output: float
    lstm_output: float
    alpha: float
    ar_contribution: float
    lstm_contribution: float
    lstm_cache: nn.LstmForwardCache


def init_hybrid(lag: int, config: TrainConfig | None = None) -> HybridModel:
    """Seeded init; the LSTM part draws the same stream as init_regressor,
    then the AR layer initializes like a dense layer and alpha_logit at 0."""
    config = config or TrainConfig()
    rng = np.random.default_rng(config.seed)
    layers = []
    d = 1
    for _ in range(config.layers):
        layers.append(LstmParams(*nn._init_layer_leaves(rng, config.hidden, d)))
        d = config.hidden
    dense = DenseParams(rng.uniform(-0.5, 0.5, config.hidden) / np.sqrt(config.hidden), 0.0)
    ar_coef_cols = rng.uniform(-0.5, 0.5, lag) / np.sqrt(lag)
    return HybridModel(
        ar_intercept=0.0,
        ar_coefficients=ar_coef_cols[::-1],
        lstm=layers,
        dense=dense,
        alpha_logit=0.0,
        lag=lag,
        train_config=config,
    )


def hybrid_forward(
    model: HybridModel, window: np.ndarray, alpha_override: float | None = None
) -> tuple[float, HybridComponents]:
    """Evaluate both branches and their convex combination on one window.

    The prediction is computed as ar_contribution + lstm_contribution, so the
    decomposition sums to it exactly. alpha_override pins the mixing weight
    (0.0 or 1.0 reproduce the standalone branch bit for bit) without touching
    the model; trained models keep alpha strictly inside (0, 1).
    """
    window = np.asarray(window, dtype=float)
    if window.shape != (model.lag,):
        raise DimensionError(f"expected window of shape ({model.lag},), got {window.shape}")
    ar_out = ar_predict(model.ar_model(), window)
    h, cache = nn.lstm_forward(model.lstm, window)
    lstm_out = nn.dense_forward(model.dense, h)
    alpha = model.alpha if alpha_override is None else float(alpha_override)
    ar_part = alpha * ar_out
    lstm_part = (1.0 - alpha) * lstm_out
    return ar_part + lstm_part, HybridComponents(
        ar_output=ar_out,
        lstm_output=lstm_out,
        alpha=alpha,
        ar_contribution=ar_part,
        lstm_contribution=lstm_part,
        lstm_cache=cache,
    )


def hybrid_predict(model: HybridModel, window: np.ndarray) -> float:
    return hybrid_forward(model, window)[0]


def hybrid_backward(
    model: HybridModel,
    window: np.ndarray,
    components: HybridComponents,
    d_out: float,
) -> dict[str, np.ndarray]:
    """Gradients of d_out * d(prediction)/d(parameter) for every parameter.

    Keys extend the nn convention with "ar.intercept", "ar.coefficients"
    (lag order) and "alpha_logit". Uses the alpha stored in `components`.
    """
    window = np.asarray(window, dtype=float)
    alpha = components.alpha
    d_lstm_out = d_out * (1.0 - alpha)
    grads = nn.backward(model.regressor(), components.lstm_cache, d_lstm_out)
    d_ar_out = d_out * alpha
    grads["ar.intercept"] = np.float64(d_ar_out)
    grads["ar.coefficients"] = d_ar_out * window[::-1]
    grads["alpha_logit"] = np.float64(
        d_out * (components.ar_output - components.lstm_output) * alpha * (1.0 - alpha)
    )
    return grads


def pack_model_params(model: HybridModel) -> dict[str, np.ndarray]:
    """Parameter dict in the hybrid_backward key convention."""
    leaves = nn.regressor_leaves(model.regressor())
    leaves["ar.intercept"] = np.float64(model.ar_intercept)
    leaves["ar.coefficients"] = model.ar_coefficients
    leaves["alpha_logit"] = np.float64(model.alpha_logit)
    return leaves


# ---------------------------------------------------------------------------
# lane-vectorized training


def hybrid_layout(layers: int, hidden: int, lag: int) -> nn.Layout:
    base = nn.regressor_layout(layers, hidden)
    entries = [(name, shape) for name, _, shape in base.entries]
    entries += [("ar.w", (lag,)), ("ar.b", ()), ("alpha", ())]
    return nn.Layout(entries)


def hybrid_leaves(model: HybridModel) -> dict[str, np.ndarray]:
    """Kernel-layout leaves; AR weights flipped into window-column order."""
    leaves = nn.regressor_leaves(model.regressor())
    leaves["ar.w"] = model.ar_coefficients[::-1]
    leaves["ar.b"] = np.float64(model.ar_intercept)
    leaves["alpha"] = np.float64(model.alpha_logit)
    return leaves


def hybrid_from_leaves(
    leaves: dict[str, np.ndarray],
    layers: int,
    lag: int,
    config: TrainConfig | None = None,
) -> HybridModel:
    reg = nn.regressor_from_leaves(leaves, layers)
    return HybridModel(
        ar_intercept=float(leaves["ar.b"]),
        ar_coefficients=np.asarray(leaves["ar.w"], dtype=float)[::-1].copy(),
        lstm=reg.layers,
        dense=reg.dense,
        alpha_logit=float(leaves["alpha"]),
        lag=lag,
        train_config=config,
    )


class HybridLaneKernel(nn.LaneKernel):
    """LaneKernel plus the AR layer and the trainable mixing weight."""

    def __init__(self, layout: nn.Layout, lanes: int, lag: int, hidden: int, layers: int):
        super().__init__(layout, lanes, lag, hidden, layers)
        self.ar_out = np.empty(lanes)
        self.lstm_out = np.empty(lanes)
        self.alpha_sig = np.empty(lanes)
        self.one_minus = np.empty(lanes)
        self.pred = np.empty(lanes)
        self._tp = np.empty((lanes, lag))
        self._tb = np.empty(lanes)
        self._dl = np.empty(lanes)
        self._dar = np.empty(lanes)

    def forward_row(self, x: np.ndarray) -> np.ndarray:
        self.lstm_out[:] = super().forward_row(x)
        np.multiply(self.p_views["ar.w"], x, out=self._tp)
        self._tp.sum(axis=1, out=self.ar_out)
        self.ar_out += self.p_views["ar.b"]
        np.negative(self.p_views["alpha"], out=self.alpha_sig)
        np.exp(self.alpha_sig, out=self.alpha_sig)
        self.alpha_sig += 1.0
        np.reciprocal(self.alpha_sig, out=self.alpha_sig)
        np.subtract(1.0, self.alpha_sig, out=self.one_minus)
        np.multiply(self.alpha_sig, self.ar_out, out=self.pred)
        np.multiply(self.one_minus, self.lstm_out, out=self._tb)
        self.pred += self._tb
        return self.pred

    def backward_row(self, x: np.ndarray, d_out: np.ndarray) -> None:
        np.multiply(d_out, self.alpha_sig, out=self._dar)
        np.multiply(d_out, self.one_minus, out=self._dl)
        np.subtract(self.ar_out, self.lstm_out, out=self._tb)
        self._tb *= d_out
        self._tb *= self.alpha_sig
        self._tb *= self.one_minus
        self.g_views["alpha"] += self._tb
        self.g_views["ar.b"] += self._dar
        np.multiply(self._dar[:, None], x, out=self._tp)
        self.g_views["ar.w"] += self._tp
        super().backward_row(x, self._dl)


@dataclass
class HybridTrainingHistory:
    """Per-epoch mean loss and end-of-epoch alpha."""

    losses: list[float]
    alphas: list[float]


def train_hybrid(
    data: SupervisedMatrix,
    config: TrainConfig | None = None,
    adam: AdamConfig | None = None,
    warm_start: ArModel | None = None,
    frozen: Sequence[str] = (),
    init_model: HybridModel | None = None,
) -> tuple[HybridModel, HybridTrainingHistory]:
    """Jointly fit the AR layer, the LSTM and alpha by Adam on squared error.

    warm_start copies an OLS fit into the AR layer before training instead of
    the random init. `frozen` names parameter groups excluded from updates
    ("lstm", "dense", "ar", "alpha" or exact leaf names). init_model starts
    from explicit parameters instead of the seeded random init.
    """
    config = config or TrainConfig()
    adam = adam or AdamConfig()
    if init_model is None:
        model0 = init_hybrid(data.lag, config)
    else:
        if init_model.lag != data.lag:
            raise DimensionError(f"init model lag {init_model.lag} vs data lag {data.lag}")
        config = dataclasses.replace(
            config, layers=len(init_model.lstm), hidden=init_model.lstm[0].hidden
        )
        model0 = init_model
    if warm_start is not None:
        if warm_start.lag != data.lag:
            raise DimensionError(f"warm start lag {warm_start.lag} vs data lag {data.lag}")
        model0 = HybridModel(
            ar_intercept=warm_start.intercept,
            ar_coefficients=warm_start.coefficients.copy(),
            lstm=model0.lstm,
            dense=model0.dense,
            alpha_logit=model0.alpha_logit,
            lag=model0.lag,
            train_config=config,
        )
    layout = hybrid_layout(config.layers, config.hidden, data.lag)
    flat = layout.pack(hybrid_leaves(model0))[None, :].copy()
    kernel = HybridLaneKernel(layout, 1, data.lag, config.hidden, config.layers)
    x, y = nn.broadcast_rows(data, 1)
    frozen_mask = layout.mask_for(frozen) if frozen else None
    alpha_view = layout.views(flat)["alpha"]
    result = nn.train_lanes(kernel, flat, x, y, config, adam, frozen_mask, alpha_view)
    if 0 in result.failed:
        raise TrainingDivergenceError(result.failed[0])
    model = hybrid_from_leaves(layout.unpack(result.flat[0]), config.layers, data.lag, config)
    assert result.alphas is not None
    return model, HybridTrainingHistory(
        losses=[float(l) for l in result.losses[:, 0]],
        alphas=[float(a) for a in result.alphas[:, 0]],
    )


def train_hybrid_seeds(
    data: SupervisedMatrix,
    seeds: Sequence[int],
    config: TrainConfig | None = None,
    adam: AdamConfig | None = None,
    warm_start: ArModel | None = None,
    frozen: Sequence[str] = (),
) -> nn.LaneTrainResult:
    """Fit one lane per seed on shared data; lane order follows `seeds`."""
    config = config or TrainConfig()
    adam = adam or AdamConfig()
    if warm_start is not None and warm_start.lag != data.lag:
        raise DimensionError(f"warm start lag {warm_start.lag} vs data lag {data.lag}")
    layout = hybrid_layout(config.layers, config.hidden, data.lag)
    rows = []
    for s in seeds:
        model0 = init_hybrid(data.lag, dataclasses.replace(config, seed=s))
        if warm_start is not None:
            model0.ar_intercept = warm_start.intercept
            model0.ar_coefficients = warm_start.coefficients.copy()
        rows.append(layout.pack(hybrid_leaves(model0)))
    flat = np.stack(rows)
    kernel = HybridLaneKernel(layout, len(seeds), data.lag, config.hidden, config.layers)
    x, y = nn.broadcast_rows(data, len(seeds))
    frozen_mask = layout.mask_for(frozen) if frozen else None
    alpha_view = layout.views(flat)["alpha"]
    return nn.train_lanes(kernel, flat, x, y, config, adam, frozen_mask, alpha_view)


# ---------------------------------------------------------------------------
# interpretation helpers


def gradient_check(
    lag: int = 5,
    hidden: int = 1,
    layers: int = 1,
    seed: int = 0,
    fd_step: float = 1e-5,
) -> float:
    """Finite-difference check over every hybrid parameter, alpha included."""
    rng = np.random.default_rng(seed)
    config = TrainConfig(hidden=hidden, layers=layers, seed=seed)
    model = init_hybrid(lag, config)
    # a non-neutral mixing weight exercises both halves of the alpha gradient
    model.alpha_logit = float(rng.uniform(-1.0, 1.0))
    window = rng.uniform(-1.0, 1.0, lag)
    target = rng.uniform(-1.0, 1.0)

    pred, components = hybrid_forward(model, window)
    analytic = hybrid_backward(model, window, components, 2.0 * (pred - target))

    def loss_with(leaves: dict[str, np.ndarray]) -> float:
        reg = nn.regressor_from_leaves(leaves, layers)
        candidate = HybridModel(
            ar_intercept=float(leaves["ar.intercept"]),
            ar_coefficients=np.asarray(leaves["ar.coefficients"], dtype=float),
            lstm=reg.layers,
            dense=reg.dense,
            alpha_logit=float(leaves["alpha_logit"]),
            lag=lag,
        )
        return (hybrid_predict(candidate, window) - target) ** 2

    return nn._finite_difference_worst_error(
        pack_model_params(model), analytic, loss_with, fd_step
    )


@dataclass
class Decomposition:
    """Per-row branch contributions; ar + lstm equals prediction exactly."""

    alpha: float
    ar_contribution: np.ndarray
    lstm_contribution: np.ndarray
    prediction: np.ndarray


def decompose(model: HybridModel, windows: SupervisedMatrix | np.ndarray) -> Decomposition:
    """Split each row's prediction into its AR and LSTM contributions."""
    inputs = windows.inputs if isinstance(windows, SupervisedMatrix) else windows
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != model.lag:
        raise DimensionError(f"expected (rows, {model.lag}) inputs, got {inputs.shape}")
    n = inputs.shape[0]
    ar_c = np.empty(n)
    lstm_c = np.empty(n)
    pred = np.empty(n)
    for i in range(n):
        p, comp = hybrid_forward(model, inputs[i])
        ar_c[i] = comp.ar_contribution
        lstm_c[i] = comp.lstm_contribution
        pred[i] = p
    return Decomposition(model.alpha, ar_c, lstm_c, pred)


@dataclass
class CoefficientReport:
    """Pure-AR and hybrid-AR coefficient rows, side by side.

    Both rows live on the scaled differenced space the models were fit on.
    """

    lag: int
    baseline_intercept: float
    baseline_coefficients: np.ndarray
    hybrid_intercept: float
    hybrid_coefficients: np.ndarray
    alpha: float

    @property
    def columns(self) -> list[str]:
        return ["model", "intercept"] + [f"Y_t-{j}" for j in range(1, self.lag + 1)] + ["alpha"]

    def rows(self) -> list[list[str]]:
        def fmt(x: float) -> str:
            return f"{x:.6f}"

        ar_row = ["AR", fmt(self.baseline_intercept)]
        ar_row += [fmt(c) for c in self.baseline_coefficients]
        ar_row += [""]
        hy_row = ["Hybrid", fmt(self.hybrid_intercept)]
        hy_row += [fmt(c) for c in self.hybrid_coefficients]
        hy_row += [f"{self.alpha:.3f}"]
        return [ar_row, hy_row]

    def to_csv_text(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(row) for row in self.rows()]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        table = [self.columns] + self.rows()
        widths = [max(len(r[i]) for r in table) for i in range(len(self.columns))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]
        lines.append("")
        lines.append(f"alpha = {self.alpha:.3f}  (coefficients on the scaled differenced space)")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "lag": self.lag,
            "alpha": self.alpha,
            "baseline": {
                "intercept": self.baseline_intercept,
                "coefficients": [float(c) for c in self.baseline_coefficients],
            },
            "hybrid": {
                "intercept": self.hybrid_intercept,
                "coefficients": [float(c) for c in self.hybrid_coefficients],
            },
            "coefficient_space": "scaled differenced",
        }


def coefficient_report(model: HybridModel, baseline: ArModel) -> CoefficientReport:
    """Side-by-side coefficient table for a hybrid and a pure AR fit."""
    if model.lag != baseline.lag:
        raise DimensionError(f"hybrid lag {model.lag} vs baseline lag {baseline.lag}")
    return CoefficientReport(
        lag=model.lag,
        baseline_intercept=baseline.intercept,
        baseline_coefficients=baseline.coefficients.copy(),
        hybrid_intercept=model.ar_intercept,
        hybrid_coefficients=model.ar_coefficients.copy(),
        alpha=model.alpha,
    )
