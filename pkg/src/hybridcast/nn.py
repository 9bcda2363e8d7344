"""From-scratch LSTM regression trained with Adam, on numpy only.

The network reads a lag window as a sequence of one-dimensional steps (oldest
value first), runs it through one or two LSTM layers, and maps the final
hidden state through an affine head to a single next-step prediction.

Cell equations per step, with sigma the logistic function:

    i_t = sigma(W_i x_t + U_i h_{t-1} + b_i)      input gate
    f_t = sigma(W_f x_t + U_f h_{t-1} + b_f)      forget gate
    o_t = sigma(W_o x_t + U_o h_{t-1} + b_o)      output gate
    g_t = tanh (W_g x_t + U_g h_{t-1} + b_g)      candidate
    c_t = f_t * c_{t-1} + i_t * g_t
    h_t = o_t * tanh(c_t)

Two implementations coexist on purpose. The public functions (lstm_forward,
forward, backward, predict) are written as plain readable loops over one
window. Training runs instead on a vectorized kernel with a leading "lane"
axis so that many independent fits (seeds x trials) advance in lockstep inside
single numpy ops; every lane computes exactly the arithmetic of an independent
run, and the test suite pins the two paths against each other.

Everything is float64 end to end, and a fixed seed fixes the whole parameter
trajectory.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, LengthError, TrainingDivergenceError
from .preprocess import SupervisedMatrix

GATE_ORDER = ("input", "forget", "output", "candidate")


def sigmoid(x):
    """Logistic function; exact 0/1 at the infinite limits."""
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# configuration and parameter containers


@dataclass(frozen=True)
class AdamConfig:
    """Adam hyperparameters (bias-corrected first/second moments)."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


@dataclass(frozen=True)
class TrainConfig:
    """Training-run shape: epochs, batching, architecture, seed."""

    epochs: int = 100
    batch_size: int = 1
    hidden: int = 1
    layers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.hidden < 1 or self.layers < 1:
            raise ValueError("epochs, batch_size, hidden and layers must all be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass
class LstmParams:
    """One LSTM layer's parameters, gates stacked along rows.

    The row blocks of w (4H x D), u (4H x H) and b (4H) follow GATE_ORDER:
    rows [0,H) input gate, [H,2H) forget, [2H,3H) output, [3H,4H) candidate.
    """

    w: np.ndarray
    u: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        h = self.hidden
        if self.u.shape != (4 * h, h) or self.b.shape != (4 * h,) or self.w.shape[0] != 4 * h:
            raise DimensionError(
                f"inconsistent gate shapes: w {self.w.shape}, u {self.u.shape}, b {self.b.shape}"
            )

    @property
    def hidden(self) -> int:
        return self.u.shape[1]

    @property
    def in_dim(self) -> int:
        return self.w.shape[1]

    def gate(self, name: str, which: str) -> np.ndarray:
        """View of one gate's block in w/u/b; name from GATE_ORDER."""
        idx = GATE_ORDER.index(name)
        h = self.hidden
        return getattr(self, which)[idx * h : (idx + 1) * h]


@dataclass
class DenseParams:
    """Affine head mapping the final hidden state to a scalar."""

    weight: np.ndarray
    bias: float

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        if self.weight.ndim != 1:
            raise DimensionError(f"dense weight must be 1-d, got shape {self.weight.shape}")


@dataclass(frozen=True)
class LstmState:
    """Hidden and cell vectors after some step."""

    hidden: np.ndarray
    cell: np.ndarray


@dataclass
class LstmRegressor:
    """Stacked LSTM layers plus the dense head; the trainable unit."""

    layers: list[LstmParams]
    dense: DenseParams
    train_config: TrainConfig | None = None

    def __post_init__(self):
        if not self.layers:
            raise DimensionError("need at least one LSTM layer")
        if self.dense.weight.shape != (self.hidden,):
            raise DimensionError(
                f"dense weight shape {self.dense.weight.shape} vs hidden {self.hidden}"
            )

    @property
    def hidden(self) -> int:
        return self.layers[-1].hidden

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def to_dict(self) -> dict:
        payload = {
            "kind": "lstm_regressor",
            "hidden": self.hidden,
            "layers": [
                {"w": _array_json(lp.w), "u": _array_json(lp.u), "b": _array_json(lp.b)}
                for lp in self.layers
            ],
            "dense": {"weight": _array_json(self.dense.weight), "bias": self.dense.bias},
            "init": {"scheme": "uniform(-0.5,0.5)/sqrt(fan_in)", "forget_bias": 1.0},
        }
        if self.train_config is not None:
            payload["train_config"] = dataclasses.asdict(self.train_config)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "LstmRegressor":
        layers = [
            LstmParams(_array_unjson(lp["w"]), _array_unjson(lp["u"]), _array_unjson(lp["b"]))
            for lp in payload["layers"]
        ]
        dense = DenseParams(_array_unjson(payload["dense"]["weight"]), float(payload["dense"]["bias"]))
        config = None
        if "train_config" in payload:
            config = TrainConfig(**payload["train_config"])
        return cls(layers=layers, dense=dense, train_config=config)


def _array_json(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "values": arr.tolist()}


def _array_unjson(payload: dict) -> np.ndarray:
    return np.asarray(payload["values"], dtype=float).reshape(payload["shape"])


# ---------------------------------------------------------------------------
# initialization

FORGET_BIAS = 1.0


def _init_layer_leaves(rng: np.random.Generator, hidden: int, in_dim: int) -> tuple[np.ndarray, ...]:
    w = rng.uniform(-0.5, 0.5, (4 * hidden, in_dim)) / np.sqrt(in_dim)
    u = rng.uniform(-0.5, 0.5, (4 * hidden, hidden)) / np.sqrt(hidden)
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = FORGET_BIAS
    return w, u, b


def init_regressor(config: TrainConfig, in_dim: int = 1) -> LstmRegressor:
    """Seeded init: weights uniform in [-0.5, 0.5] scaled by 1/sqrt(fan-in),
    biases zero except the forget gate's, which starts at +1.0."""
    rng = np.random.default_rng(config.seed)
    layers = []
    d = in_dim
    for _ in range(config.layers):
        layers.append(LstmParams(*_init_layer_leaves(rng, config.hidden, d)))
        d = config.hidden
    dense = DenseParams(rng.uniform(-0.5, 0.5, config.hidden) / np.sqrt(config.hidden), 0.0)
    return LstmRegressor(layers=layers, dense=dense, train_config=config)


# ---------------------------------------------------------------------------
# plain single-window forward / backward (reference path)


def _as_sequence(window: np.ndarray, in_dim: int) -> np.ndarray:
    seq = np.asarray(window, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    if seq.ndim != 2 or seq.shape[1] != in_dim:
        raise DimensionError(f"expected a (steps, {in_dim}) sequence, got shape {seq.shape}")
    return seq


@dataclass
class _StepCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    gates: np.ndarray  # post-activation, stacked (4H,)
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray


@dataclass
class LstmForwardCache:
    """Per-layer, per-step values retained for backpropagation through time."""

    steps: list[list[_StepCache]]  # [layer][t]

    @property
    def final_state(self) -> LstmState:
        last = self.steps[-1][-1]
        return LstmState(hidden=last.h, cell=last.c)

    def hidden_sequence(self, layer: int = -1) -> np.ndarray:
        return np.stack([s.h for s in self.steps[layer]])


def lstm_forward(
    params: LstmParams | Sequence[LstmParams], sequence: np.ndarray
) -> tuple[np.ndarray, LstmForwardCache]:
    """Run the cell recurrence from zero state over a sequence.

    Accepts one layer or a stack; a 1-d sequence is treated as (steps, 1).
    Returns the top layer's final hidden state and the cache backward needs.
    """
    layers = [params] if isinstance(params, LstmParams) else list(params)
    seq = _as_sequence(sequence, layers[0].in_dim)
    all_steps: list[list[_StepCache]] = []
    for lp in layers:
        h = np.zeros(lp.hidden)
        c = np.zeros(lp.hidden)
        steps: list[_StepCache] = []
        outputs = []
        for t in range(seq.shape[0]):
            x = seq[t]
            pre = lp.w @ x + lp.u @ h + lp.b
            hh = lp.hidden
            gates = np.empty(4 * hh)
            gates[: 3 * hh] = sigmoid(pre[: 3 * hh])
            gates[3 * hh :] = np.tanh(pre[3 * hh :])
            i_g, f_g, o_g, g_g = (gates[k * hh : (k + 1) * hh] for k in range(4))
            c_new = f_g * c + i_g * g_g
            tc = np.tanh(c_new)
            h_new = o_g * tc
            steps.append(_StepCache(x, h, c, gates, c_new, tc, h_new))
            h, c = h_new, c_new
            outputs.append(h_new)
        all_steps.append(steps)
        seq = np.stack(outputs)
    return all_steps[-1][-1].h, LstmForwardCache(steps=all_steps)


def dense_forward(dense: DenseParams, hidden: np.ndarray) -> float:
    if hidden.shape != dense.weight.shape:
        raise DimensionError(f"hidden {hidden.shape} vs dense weight {dense.weight.shape}")
    return float(dense.weight @ hidden + dense.bias)


def forward(model: LstmRegressor, window: np.ndarray) -> tuple[float, LstmForwardCache]:
    """Full network on one window: LSTM stack then the dense head."""
    h, cache = lstm_forward(model.layers, window)
    return dense_forward(model.dense, h), cache


def predict(model: LstmRegressor, window: np.ndarray) -> float:
    return forward(model, window)[0]


def backward(model: LstmRegressor, cache: LstmForwardCache, d_out: float) -> dict[str, np.ndarray]:
    """Exact gradients of d_out * d(prediction)/d(parameter) via BPTT.

    Returns a dict keyed like "lstm0.w", "lstm0.u", "lstm0.b", "dense.weight",
    "dense.bias" with arrays shaped like the corresponding parameters.
    """
    grads: dict[str, np.ndarray] = {}
    top = cache.steps[-1][-1]
    grads["dense.weight"] = d_out * top.h
    grads["dense.bias"] = np.float64(d_out)

    n_steps = len(cache.steps[0])
    # upstream gradient on each layer's hidden sequence; the dense head only
    # touches the top layer's final step, lower layers receive every step
    d_hidden_seq = [np.zeros((n_steps, lp.hidden)) for lp in model.layers]
    d_hidden_seq[-1][-1] = d_out * model.dense.weight

    for li in range(model.n_layers - 1, -1, -1):
        lp = model.layers[li]
        hh = lp.hidden
        dw = np.zeros_like(lp.w)
        du = np.zeros_like(lp.u)
        db = np.zeros_like(lp.b)
        dh_rec = np.zeros(hh)
        dc = np.zeros(hh)
        for t in range(n_steps - 1, -1, -1):
            s = cache.steps[li][t]
            dh = d_hidden_seq[li][t] + dh_rec
            i_g, f_g, o_g, g_g = (s.gates[k * hh : (k + 1) * hh] for k in range(4))
            da = np.empty(4 * hh)
            da_i, da_f, da_o, da_g = (da[k * hh : (k + 1) * hh] for k in range(4))
            da_o[:] = dh * s.tanh_c * o_g * (1.0 - o_g)
            dc = dc + dh * o_g * (1.0 - s.tanh_c**2)
            da_f[:] = dc * s.c_prev * f_g * (1.0 - f_g)
            da_i[:] = dc * g_g * i_g * (1.0 - i_g)
            da_g[:] = dc * i_g * (1.0 - g_g**2)
            dw += np.outer(da, s.x)
            du += np.outer(da, s.h_prev)
            db += da
            if li > 0:
                d_hidden_seq[li - 1][t] += lp.w.T @ da
            dh_rec = lp.u.T @ da
            dc = dc * f_g
        grads[f"lstm{li}.w"] = dw
        grads[f"lstm{li}.u"] = du
        grads[f"lstm{li}.b"] = db
    return grads


def mse_loss(predictions: np.ndarray, targets: np.ndarray) -> float:
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape:
        raise DimensionError(f"shape mismatch: {predictions.shape} vs {targets.shape}")
    return float(np.mean((predictions - targets) ** 2))


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """First/second moment estimates per parameter, plus the step counter."""

    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


def init_adam_state(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        step=0,
        m={k: np.zeros_like(np.asarray(v, dtype=float)) for k, v in params.items()},
        v={k: np.zeros_like(np.asarray(v, dtype=float)) for k, v in params.items()},
    )


def _adam_update(params, grads, m, v, step, cfg: AdamConfig) -> None:
    """One in-place Adam update; shared by the public op and the lane kernel."""
    b1, b2 = cfg.beta1, cfg.beta2
    m *= b1
    m += (1.0 - b1) * grads
    v *= b2
    v += (1.0 - b2) * (grads * grads)
    m_hat = m / (1.0 - b1**step)
    v_hat = v / (1.0 - b2**step)
    params -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: AdamConfig | None = None,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """Functional Adam step over a dict of parameter arrays.

    Raises on non-finite gradients, naming the offending parameter and step.
    """
    config = config or AdamConfig()
    if set(params) != set(grads) or set(params) != set(state.m):
        raise DimensionError("params, grads and state must share the same keys")
    step = state.step + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name in params:
        g = np.asarray(grads[name], dtype=float)
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError(
                state.step, f"non-finite gradient for {name!r} at step {step}"
            )
        p = np.array(params[name], dtype=float)
        m = state.m[name].copy()
        v = state.v[name].copy()
        _adam_update(p, g, m, v, step, config)
        new_params[name], new_m[name], new_v[name] = p, m, v
    return new_params, AdamState(step=step, m=new_m, v=new_v)


# ---------------------------------------------------------------------------
# flat parameter layout for the lane-vectorized kernel


class Layout:
    """Maps named parameter leaves onto segments of one flat vector."""

    def __init__(self, entries: list[tuple[str, tuple[int, ...]]]):
        self.entries: list[tuple[str, int, tuple[int, ...]]] = []
        offset = 0
        for name, shape in entries:
            self.entries.append((name, offset, shape))
            offset += int(np.prod(shape, dtype=int)) if shape else 1
        self.size = offset

    def views(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        """Per-leaf views (lane axis first) into a (lanes, size) array."""
        lanes = flat.shape[0]
        out = {}
        for name, offset, shape in self.entries:
            size = int(np.prod(shape, dtype=int)) if shape else 1
            out[name] = flat[:, offset : offset + size].reshape((lanes, *shape))
        return out

    def pack(self, leaves: dict[str, np.ndarray]) -> np.ndarray:
        flat = np.empty(self.size)
        for name, offset, shape in self.entries:
            size = int(np.prod(shape, dtype=int)) if shape else 1
            flat[offset : offset + size] = np.asarray(leaves[name], dtype=float).reshape(size)
        return flat

    def unpack(self, flat_row: np.ndarray) -> dict[str, np.ndarray]:
        out = {}
        for name, offset, shape in self.entries:
            size = int(np.prod(shape, dtype=int)) if shape else 1
            out[name] = flat_row[offset : offset + size].reshape(shape).copy()
        return out

    def mask_for(self, frozen: Sequence[str]) -> np.ndarray:
        """1/0 vector zeroing gradient segments whose name starts with a frozen prefix."""
        mask = np.ones(self.size)
        for name, offset, shape in self.entries:
            if any(name == f or name.startswith(f) for f in frozen):
                size = int(np.prod(shape, dtype=int)) if shape else 1
                mask[offset : offset + size] = 0.0
        return mask


def regressor_layout(layers: int, hidden: int, in_dim: int = 1) -> Layout:
    entries: list[tuple[str, tuple[int, ...]]] = []
    d = in_dim
    for li in range(layers):
        entries += [
            (f"lstm{li}.w", (4 * hidden, d)),
            (f"lstm{li}.u", (4 * hidden, hidden)),
            (f"lstm{li}.b", (4 * hidden,)),
        ]
        d = hidden
    entries += [("dense.weight", (hidden,)), ("dense.bias", ())]
    return Layout(entries)


def regressor_leaves(model: LstmRegressor) -> dict[str, np.ndarray]:
    leaves: dict[str, np.ndarray] = {}
    for li, lp in enumerate(model.layers):
        leaves[f"lstm{li}.w"] = lp.w
        leaves[f"lstm{li}.u"] = lp.u
        leaves[f"lstm{li}.b"] = lp.b
    leaves["dense.weight"] = model.dense.weight
    leaves["dense.bias"] = np.float64(model.dense.bias)
    return leaves


def regressor_from_leaves(
    leaves: dict[str, np.ndarray], layers: int, config: TrainConfig | None = None
) -> LstmRegressor:
    lstm = [
        LstmParams(leaves[f"lstm{li}.w"], leaves[f"lstm{li}.u"], leaves[f"lstm{li}.b"])
        for li in range(layers)
    ]
    dense = DenseParams(leaves["dense.weight"], float(leaves["dense.bias"]))
    return LstmRegressor(layers=lstm, dense=dense, train_config=config)


# ---------------------------------------------------------------------------
# lane-vectorized kernel: many independent fits advance in lockstep


class LaneKernel:
    """Forward/backward over a leading lane axis with preallocated buffers.

    Lane l reads row r's window from x[l], its own parameter segment flat[l],
    and accumulates gradients into grads[l]; no arithmetic ever mixes lanes,
    so each lane reproduces an independent single-model run. The hidden size 1
    path (the only configuration the rolling evaluation uses) is written with
    elementwise broadcasts; larger hidden sizes fall back to einsum.
    """

    def __init__(self, layout: Layout, lanes: int, lag: int, hidden: int, layers: int):
        self.layout = layout
        self.lanes, self.lag, self.hidden, self.n_layers = lanes, lag, hidden, layers
        b, h, p = lanes, hidden, lag
        self.gates = [[np.empty((b, 4 * h)) for _ in range(p)] for _ in range(layers)]
        self.cells = [[np.empty((b, h)) for _ in range(p)] for _ in range(layers)]
        self.tanh_cells = [[np.empty((b, h)) for _ in range(p)] for _ in range(layers)]
        self.hiddens = [[np.empty((b, h)) for _ in range(p)] for _ in range(layers)]
        # cross-layer upstream gradients, filled while walking layers top-down
        self.dx_seq = [[np.empty((b, h)) for _ in range(p)] for _ in range(max(layers - 1, 0))]
        self.zero_h = np.zeros((b, h))
        self._t4 = np.empty((b, 4 * h))
        self._da = np.empty((b, 4 * h))
        self._th = np.empty((b, h))
        self._dh_a = np.empty((b, h))
        self._dh_b = np.empty((b, h))
        self._dc = np.empty((b, h))
        self.yhat = np.empty(b)
        self.flat: np.ndarray | None = None
        self.grads: np.ndarray | None = None

    def attach(self, flat: np.ndarray, grads: np.ndarray) -> None:
        """Bind parameter and gradient storage; builds per-leaf views once."""
        self.flat, self.grads = flat, grads
        self.p_views = self.layout.views(flat)
        self.g_views = self.layout.views(grads)

    # -- forward -----------------------------------------------------------

    def forward_row(self, x: np.ndarray) -> np.ndarray:
        """One window per lane, x of shape (lanes, lag); returns predictions."""
        h = self.hidden
        for li in range(self.n_layers):
            w = self.p_views[f"lstm{li}.w"]
            u = self.p_views[f"lstm{li}.u"]
            bias = self.p_views[f"lstm{li}.b"]
            d = w.shape[2]
            h_prev = self.zero_h
            c_prev = self.zero_h
            for t in range(self.lag):
                xt = x[:, t : t + 1] if li == 0 else self.hiddens[li - 1][t]
                z = self.gates[li][t]
                if d == 1 and h == 1:
                    np.multiply(w[:, :, 0], xt, out=z)
                    np.multiply(u[:, :, 0], h_prev, out=self._t4)
                    z += self._t4
                else:
                    np.einsum("bkd,bd->bk", w, xt, out=z)
                    np.einsum("bkh,bh->bk", u, h_prev, out=self._t4)
                    z += self._t4
                z += bias
                sig = z[:, : 3 * h]
                np.negative(sig, out=sig)
                np.exp(sig, out=sig)
                sig += 1.0
                np.reciprocal(sig, out=sig)
                np.tanh(z[:, 3 * h :], out=z[:, 3 * h :])
                c = self.cells[li][t]
                np.multiply(z[:, h : 2 * h], c_prev, out=c)
                np.multiply(z[:, :h], z[:, 3 * h :], out=self._th)
                c += self._th
                tc = self.tanh_cells[li][t]
                np.tanh(c, out=tc)
                hh = self.hiddens[li][t]
                np.multiply(z[:, 2 * h : 3 * h], tc, out=hh)
                h_prev, c_prev = hh, c
        dw = self.p_views["dense.weight"]
        top = self.hiddens[-1][-1]
        np.multiply(dw, top, out=self._th)
        self._th.sum(axis=1, out=self.yhat)
        self.yhat += self.p_views["dense.bias"]
        return self.yhat

    # -- backward ----------------------------------------------------------

    def backward_row(self, x: np.ndarray, d_out: np.ndarray) -> None:
        """Accumulate gradients for one window per lane; d_out shape (lanes,)."""
        h = self.hidden
        top = self.hiddens[-1][-1]
        d_col = d_out[:, None]
        self.g_views["dense.weight"] += d_col * top
        self.g_views["dense.bias"] += d_out
        for li in range(self.n_layers - 1, -1, -1):
            w = self.p_views[f"lstm{li}.w"]
            u = self.p_views[f"lstm{li}.u"]
            gw = self.g_views[f"lstm{li}.w"]
            gu = self.g_views[f"lstm{li}.u"]
            gb = self.g_views[f"lstm{li}.b"]
            d = w.shape[2]
            dc = self._dc
            dc[:] = 0.0
            dh = self._dh_a
            dh_next = self._dh_b
            if li == self.n_layers - 1:
                np.multiply(d_col, self.p_views["dense.weight"], out=dh)
            else:
                dh[:] = self.dx_seq[li][self.lag - 1]
            da = self._da
            th = self._th
            for t in range(self.lag - 1, -1, -1):
                z = self.gates[li][t]
                i_g, f_g = z[:, :h], z[:, h : 2 * h]
                o_g, g_g = z[:, 2 * h : 3 * h], z[:, 3 * h :]
                tc = self.tanh_cells[li][t]
                c_prev = self.cells[li][t - 1] if t > 0 else self.zero_h
                h_prev = self.hiddens[li][t - 1] if t > 0 else self.zero_h
                xt = x[:, t : t + 1] if li == 0 else self.hiddens[li - 1][t]
                da_i, da_f = da[:, :h], da[:, h : 2 * h]
                da_o, da_g = da[:, 2 * h : 3 * h], da[:, 3 * h :]
                # output gate
                np.multiply(dh, tc, out=da_o)
                da_o *= o_g
                np.subtract(1.0, o_g, out=th)
                da_o *= th
                # cell: dc += dh * o * (1 - tanh(c)^2)
                np.multiply(tc, tc, out=th)
                np.subtract(1.0, th, out=th)
                th *= o_g
                th *= dh
                dc += th
                # forget gate
                np.multiply(dc, c_prev, out=da_f)
                da_f *= f_g
                np.subtract(1.0, f_g, out=th)
                da_f *= th
                # input gate
                np.multiply(dc, g_g, out=da_i)
                da_i *= i_g
                np.subtract(1.0, i_g, out=th)
                da_i *= th
                # candidate
                np.multiply(dc, i_g, out=da_g)
                np.multiply(g_g, g_g, out=th)
                np.subtract(1.0, th, out=th)
                da_g *= th
                # parameter gradients
                if d == 1 and h == 1:
                    np.multiply(da, xt, out=self._t4)
                    gw[:, :, 0] += self._t4
                    np.multiply(da, h_prev, out=self._t4)
                    gu[:, :, 0] += self._t4
                    gb += da
                    if li > 0:
                        np.multiply(w[:, :, 0], da, out=self._t4)
                        self._t4.sum(axis=1, out=self.dx_seq[li - 1][t][:, 0])
                    np.multiply(u[:, :, 0], da, out=self._t4)
                    self._t4.sum(axis=1, out=dh_next[:, 0])
                else:
                    gw += np.einsum("bk,bd->bkd", da, xt)
                    gu += np.einsum("bk,bh->bkh", da, h_prev)
                    gb += da
                    if li > 0:
                        np.einsum("bkd,bk->bd", w, da, out=self.dx_seq[li - 1][t])
                    np.einsum("bkh,bk->bh", u, da, out=dh_next)
                dc *= f_g
                if t > 0:
                    if li < self.n_layers - 1:
                        dh_next += self.dx_seq[li][t - 1]
                    dh, dh_next = dh_next, dh


def broadcast_rows(data: SupervisedMatrix, lanes: int) -> tuple[np.ndarray, np.ndarray]:
    """Read-only lane views of one supervised matrix shared by all lanes."""
    x = np.broadcast_to(data.inputs, (lanes, *data.inputs.shape))
    y = np.broadcast_to(data.targets, (lanes, *data.targets.shape))
    return x, y


@dataclass
class LaneTrainResult:
    """Outcome of a vectorized multi-lane fit."""

    layout: Layout
    flat: np.ndarray  # (lanes, size), final parameters
    losses: np.ndarray  # (epochs, lanes), per-epoch mean training loss
    failed: dict[int, int]  # lane -> first epoch with non-finite loss
    alphas: np.ndarray | None = None  # (epochs, lanes) for hybrid fits

    @property
    def lanes(self) -> int:
        return self.flat.shape[0]


def train_lanes(
    kernel: LaneKernel,
    flat: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    adam: AdamConfig,
    frozen_mask: np.ndarray | None = None,
    alpha_view: np.ndarray | None = None,
) -> LaneTrainResult:
    """Drive epochs x rows of batch-gradient Adam over all lanes at once.

    Rows are visited in order with no shuffling; batch_size rows share one
    Adam step (size 1 means one step per row). Lanes whose epoch loss goes
    non-finite are recorded in `failed` and keep running on NaNs, which never
    leak across lanes.
    """
    lanes, rows, _ = x.shape
    if config.batch_size > rows:
        raise LengthError(f"batch_size {config.batch_size} exceeds {rows} training rows")
    grads = np.zeros_like(flat)
    kernel.attach(flat, grads)
    m = np.zeros_like(flat)
    v = np.zeros_like(flat)
    losses = np.empty((config.epochs, lanes))
    alphas = np.empty((config.epochs, lanes)) if alpha_view is not None else None
    starts = range(0, rows, config.batch_size)
    step = 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for epoch in range(config.epochs):
            loss_acc = np.zeros(lanes)
            for s in starts:
                batch = range(s, min(s + config.batch_size, rows))
                grads[:] = 0.0
                inv = 2.0 / len(batch)
                for r in batch:
                    yhat = kernel.forward_row(x[:, r, :])
                    err = yhat - y[:, r]
                    loss_acc += err * err
                    kernel.backward_row(x[:, r, :], inv * err)
                if frozen_mask is not None:
                    grads *= frozen_mask
                step += 1
                _adam_update(flat, grads, m, v, step, adam)
            losses[epoch] = loss_acc / rows
            if alphas is not None:
                alphas[epoch] = sigmoid(alpha_view)
    bad = ~np.isfinite(losses)
    failed = {
        int(lane): int(bad[:, lane].argmax()) for lane in np.nonzero(bad.any(axis=0))[0]
    }
    return LaneTrainResult(kernel.layout, flat, losses, failed, alphas)


def predict_lanes(kernel: LaneKernel, flat: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Predictions for every lane over a shared row axis; x is (lanes, rows, lag)."""
    grads = np.zeros_like(flat)
    kernel.attach(flat, grads)
    out = np.empty((x.shape[0], x.shape[1]))
    with np.errstate(over="ignore", invalid="ignore"):
        for r in range(x.shape[1]):
            out[:, r] = kernel.forward_row(x[:, r, :])
    return out


# ---------------------------------------------------------------------------
# public training entry points


def train_lstm(
    data: SupervisedMatrix,
    config: TrainConfig | None = None,
    adam: AdamConfig | None = None,
) -> tuple[LstmRegressor, list[float]]:
    """Fit one LSTM regressor on a supervised matrix.

    Deterministic in (data, config, adam): the same seed always walks the same
    parameter trajectory. Raises TrainingDivergenceError (with the epoch) if
    the loss goes non-finite.
    """
    config = config or TrainConfig()
    adam = adam or AdamConfig()
    layout = regressor_layout(config.layers, config.hidden)
    model0 = init_regressor(config)
    flat = layout.pack(regressor_leaves(model0))[None, :].copy()
    kernel = LaneKernel(layout, 1, data.lag, config.hidden, config.layers)
    x, y = broadcast_rows(data, 1)
    result = train_lanes(kernel, flat, x, y, config, adam)
    if 0 in result.failed:
        raise TrainingDivergenceError(result.failed[0])
    leaves = layout.unpack(result.flat[0])
    model = regressor_from_leaves(leaves, config.layers, config)
    return model, [float(l) for l in result.losses[:, 0]]


def train_lstm_seeds(
    data: SupervisedMatrix,
    seeds: Sequence[int],
    config: TrainConfig | None = None,
    adam: AdamConfig | None = None,
) -> LaneTrainResult:
    """Fit one lane per seed on shared data; lane order follows `seeds`."""
    config = config or TrainConfig()
    adam = adam or AdamConfig()
    layout = regressor_layout(config.layers, config.hidden)
    flat = np.stack(
        [
            layout.pack(regressor_leaves(init_regressor(dataclasses.replace(config, seed=s))))
            for s in seeds
        ]
    )
    kernel = LaneKernel(layout, len(seeds), data.lag, config.hidden, config.layers)
    x, y = broadcast_rows(data, len(seeds))
    return train_lanes(kernel, flat, x, y, config, adam)


# ---------------------------------------------------------------------------
# gradient checking


def pack_model_params(model: LstmRegressor) -> dict[str, np.ndarray]:
    """Parameter dict in the same key convention backward() uses."""
    return regressor_leaves(model)


def gradient_check(
    hidden: int = 1,
    steps: int = 5,
    seed: int = 0,
    layers: int = 1,
    fd_step: float = 1e-5,
) -> float:
    """Worst relative error between BPTT and central finite differences.

    Builds a random small instance, runs the squared-error loss on one window,
    and perturbs every parameter both ways. The error denominator is
    max(|analytic|, |numeric|, 1e-3) so that near-zero gradients cannot blow
    up the ratio past the finite-difference noise floor.
    """
    rng = np.random.default_rng(seed)
    config = TrainConfig(hidden=hidden, layers=layers, seed=seed)
    model = init_regressor(config)
    window = rng.uniform(-1.0, 1.0, steps)
    target = rng.uniform(-1.0, 1.0)

    pred, cache = forward(model, window)
    analytic = backward(model, cache, 2.0 * (pred - target))

    def loss_with(leaves: dict[str, np.ndarray]) -> float:
        candidate = regressor_from_leaves(leaves, layers)
        return (predict(candidate, window) - target) ** 2

    return _finite_difference_worst_error(
        regressor_leaves(model), analytic, loss_with, fd_step
    )


def _finite_difference_worst_error(leaves, analytic, loss_fn, fd_step) -> float:
    worst = 0.0
    for name, arr in leaves.items():
        arr = np.atleast_1d(np.asarray(arr, dtype=float))
        grad = np.atleast_1d(np.asarray(analytic[name], dtype=float))
        flat_view = arr.reshape(-1)
        grad_view = grad.reshape(-1)
        for idx in range(flat_view.size):
            original = flat_view[idx]
            mutated = {
                k: (np.array(v, dtype=float, copy=True) if k == name else v)
                for k, v in leaves.items()
            }
            mut_view = np.atleast_1d(mutated[name]).reshape(-1)
            mut_view[idx] = original + fd_step
            up = loss_fn(mutated)
            mut_view[idx] = original - fd_step
            down = loss_fn(mutated)
            numeric = (up - down) / (2.0 * fd_step)
            denom = max(abs(grad_view[idx]), abs(numeric), 1e-3)
            worst = max(worst, abs(grad_view[idx] - numeric) / denom)
    return worst
