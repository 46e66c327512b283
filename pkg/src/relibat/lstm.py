"""Single-hidden-layer LSTM regressor trained with mini-batch Adam.

The model reads a window of normalized records and predicts the next
normalized network reliability (many-to-one). Gates follow the usual
formulation::

    F = sigmoid(W_xf x + W_hf h + b_f)      I = sigmoid(W_xi x + W_hi h + b_i)
    O = sigmoid(W_xo x + W_ho h + b_o)      N = tanh(W_xc x + W_hc h + b_c)
    C = F * C_prev + I * N                  H = O * tanh(C)

and the output is ``w_out . H_last + b_out``. Everything runs in float64 numpy.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .streams import stream

GATES = ("f", "i", "o", "c")
PARAM_NAMES = (
    tuple(f"w_x{g}" for g in GATES)
    + tuple(f"w_h{g}" for g in GATES)
    + tuple(f"b_{g}" for g in GATES)
    + ("w_out", "b_out")
)
MODEL_FORMAT = "relibat-lstm"
MODEL_VERSION = 1


def param_count(input_dim: int, hidden: int) -> tuple[int, int, int]:
    """(recurrent layer, output layer, total) trainable parameter counts."""
    if input_dim < 1 or hidden < 1:
        raise ValueError("input_dim and hidden must be positive")
    first = 4 * hidden * (input_dim + hidden + 1)
    second = hidden + 1
    return first, second, first + second


def _shapes(eta: int, h: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for g in GATES:
        shapes[f"w_x{g}"] = (h, eta)
    for g in GATES:
        shapes[f"w_h{g}"] = (h, h)
    for g in GATES:
        shapes[f"b_{g}"] = (h,)
    shapes["w_out"] = (h,)
    shapes["b_out"] = (1,)
    return shapes


@dataclass
class LstmParams:
    input_dim: int
    hidden_dim: int
    arrays: dict[str, np.ndarray]

    def __post_init__(self):
        shapes = _shapes(self.input_dim, self.hidden_dim)
        if set(self.arrays) != set(shapes):
            raise ValueError(f"parameter names must be {sorted(shapes)}")
        for name, shape in shapes.items():
            arr = np.asarray(self.arrays[name], dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            self.arrays[name] = arr
        self.check_finite()

    @classmethod
    def zeros(cls, input_dim: int, hidden: int) -> "LstmParams":
        return cls(input_dim, hidden, {k: np.zeros(s) for k, s in _shapes(input_dim, hidden).items()})

    @classmethod
    def initialize(cls, input_dim: int, hidden: int, seed: int) -> "LstmParams":
        """Weights uniform on [-1/sqrt(h), 1/sqrt(h)], biases zero."""
        rng = stream(seed, 2)
        bound = 1.0 / math.sqrt(hidden)
        arrays = {}
        for name, shape in _shapes(input_dim, hidden).items():
            if name.startswith("w_"):
                arrays[name] = rng.uniform(-bound, bound, size=shape)
            else:
                arrays[name] = np.zeros(shape)
        return cls(input_dim, hidden, arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def copy(self) -> "LstmParams":
        return LstmParams(self.input_dim, self.hidden_dim, {k: v.copy() for k, v in self.arrays.items()})

    def count(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def check_finite(self) -> None:
        for name in PARAM_NAMES:
            if not np.all(np.isfinite(self.arrays[name])):
                raise FloatingPointError(f"parameter {name} holds a non-finite value")

    def stacked(self):
        """Gate blocks stacked in f, i, o, c order: (4h, eta), (4h, h), (4h,)."""
        a = self.arrays
        wx = np.concatenate([a[f"w_x{g}"] for g in GATES], axis=0)
        wh = np.concatenate([a[f"w_h{g}"] for g in GATES], axis=0)
        b = np.concatenate([a[f"b_{g}"] for g in GATES])
        return wx, wh, b


@dataclass
class CellState:
    hidden: np.ndarray
    cell: np.ndarray

    @classmethod
    def zeros(cls, hidden: int, batch: int | None = None) -> "CellState":
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(np.zeros(shape), np.zeros(shape))


@dataclass
class GateTrace:
    forget: np.ndarray
    input: np.ndarray
    output: np.ndarray
    new: np.ndarray


def _sigmoid(z):
    # split form avoids overflow in exp for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _step(wx, wh, b, x, h_prev, c_prev):
    hd = h_prev.shape[-1]
    z = x @ wx.T + h_prev @ wh.T + b
    f = _sigmoid(z[..., :hd])
    i = _sigmoid(z[..., hd:2 * hd])
    o = _sigmoid(z[..., 2 * hd:3 * hd])
    n = np.tanh(z[..., 3 * hd:])
    c = f * c_prev + i * n
    h = o * np.tanh(c)
    return h, c, GateTrace(f, i, o, n)


def cell_forward(params: LstmParams, x, prev: CellState) -> tuple[CellState, GateTrace]:
    """One LSTM step for a single input vector or a (B, eta) batch."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.input_dim:
        raise ValueError(f"input has {x.shape[-1]} features, model expects {params.input_dim}")
    if prev.hidden.shape[-1] != params.hidden_dim or prev.hidden.shape != prev.cell.shape:
        raise ValueError("previous state does not match the hidden size")
    h, c, trace = _step(*params.stacked(), x, prev.hidden, prev.cell)
    return CellState(h, c), trace


def _forward(params: LstmParams, inputs: np.ndarray):
    """Unrolled forward pass over (B, W, eta); returns predictions and the cache."""
    wx, wh, b = params.stacked()
    bsz, steps, _ = inputs.shape
    hd = params.hidden_dim
    h = np.zeros((bsz, hd))
    c = np.zeros((bsz, hd))
    cache = []
    for s in range(steps):
        h_prev, c_prev = h, c
        h, c, g = _step(wx, wh, b, inputs[:, s, :], h_prev, c_prev)
        cache.append((h_prev, c_prev, g, c))
    y = h @ params["w_out"] + params["b_out"][0]
    return y, h, cache, wh


def _check_inputs(params: LstmParams, inputs, window: int | None = None) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 3:
        raise ValueError(f"expected (blocks, window, features) inputs, got shape {x.shape}")
    if x.shape[2] != params.input_dim:
        raise ValueError(f"inputs have {x.shape[2]} features, model expects {params.input_dim}")
    if window is not None and x.shape[1] != window:
        raise ValueError(f"window length {x.shape[1]} differs from the model's {window}")
    return x


def predict(params: LstmParams, inputs) -> np.ndarray:
    """Predictions for a (B, W, eta) stack of windows."""
    x = _check_inputs(params, inputs)
    return _forward(params, x)[0]


def predict_window(params: LstmParams, window, length: int = 5) -> float:
    w = np.asarray(window, dtype=float)
    if w.ndim != 2 or w.shape[0] != length:
        raise ValueError(f"window must hold {length} rows, got shape {w.shape}")
    return float(predict(params, w[None])[0])


def loss(params: LstmParams, inputs, targets) -> float:
    """Mean squared error over the given blocks."""
    x = _check_inputs(params, inputs)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("loss needs at least one block")
    if y.shape[0] != x.shape[0]:
        raise ValueError("inputs and targets disagree on the block count")
    err = _forward(params, x)[0] - y
    return float(np.mean(err * err))


def gradients(params: LstmParams, inputs, targets) -> tuple[dict[str, np.ndarray], float]:
    """Exact gradient of the MSE by backpropagation through time.

    Returns ``(grads, loss)``; ``grads`` is keyed like ``params.arrays``.
    """
    x = _check_inputs(params, inputs)
    y = np.asarray(targets, dtype=float).reshape(-1)
    bsz = x.shape[0]
    if bsz == 0:
        raise ValueError("gradients need at least one block")
    if y.shape[0] != bsz:
        raise ValueError("inputs and targets disagree on the block count")
    hd = params.hidden_dim
    pred, h_last, cache, wh = _forward(params, x)
    err = pred - y
    value = float(np.mean(err * err))

    dy = 2.0 * err / bsz
    g_wout = h_last.T @ dy
    g_bout = np.array([dy.sum()])
    g_wx = np.zeros((4 * hd, params.input_dim))
    g_wh = np.zeros((4 * hd, hd))
    g_b = np.zeros(4 * hd)

    dh = dy[:, None] * params["w_out"][None, :]
    dc_next = np.zeros((bsz, hd))
    for s in range(x.shape[1] - 1, -1, -1):
        h_prev, c_prev, g, c = cache[s]
        tc = np.tanh(c)
        do = dh * tc
        dc = dc_next + dh * g.output * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dc * c_prev * g.forget * (1.0 - g.forget),
                dc * g.new * g.input * (1.0 - g.input),
                do * g.output * (1.0 - g.output),
                dc * g.input * (1.0 - g.new * g.new),
            ],
            axis=1,
        )
        g_wx += dz.T @ x[:, s, :]
        g_wh += dz.T @ h_prev
        g_b += dz.sum(axis=0)
        dh = dz @ wh
        dc_next = dc * g.forget

    grads: dict[str, np.ndarray] = {}
    for k, gname in enumerate(GATES):
        rows = slice(k * hd, (k + 1) * hd)
        grads[f"w_x{gname}"] = g_wx[rows]
        grads[f"w_h{gname}"] = g_wh[rows]
        grads[f"b_{gname}"] = g_b[rows]
    grads["w_out"] = g_wout
    grads["b_out"] = g_bout
    for name in PARAM_NAMES:
        if not np.all(np.isfinite(grads[name])):
            raise FloatingPointError(f"non-finite gradient for parameter {name}")
    return grads, value


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tau: int = 0
    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: LstmParams, grads: dict[str, np.ndarray]) -> LstmParams:
    """One bias-corrected Adam update, in place; epsilon sits inside the square root."""
    state.tau += 1
    c1 = 1.0 - state.beta1 ** state.tau
    c2 = 1.0 - state.beta2 ** state.tau
    for name, g in grads.items():
        m = state.first.get(name)
        if m is None:
            m = state.first[name] = np.zeros_like(g)
            state.second[name] = np.zeros_like(g)
        v = state.second[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        params.arrays[name] -= state.lr * m_hat / np.sqrt(v_hat + state.eps)
    return params


@dataclass
class TrainConfig:
    hidden: int = 10
    epochs: int = 500
    batch: int = 32
    seed: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 20
    min_improvement: float = 1e-10

    def __post_init__(self):
        if self.hidden < 1 or self.batch < 1 or self.epochs < 0:
            raise ValueError("hidden and batch must be positive, epochs non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.lr <= 0 or self.eps <= 0:
            raise ValueError("invalid Adam hyperparameters")


@dataclass
class TrainResult:
    params: LstmParams
    history: list[tuple[int, float, float]]
    adam: AdamState
    seconds: float = 0.0

    @property
    def final_train_loss(self) -> float:
        return self.history[-1][1] if self.history else float("nan")

    @property
    def final_test_loss(self) -> float:
        return self.history[-1][2] if self.history else float("nan")


def train(train_x, train_y, config: TrainConfig, test_x=None, test_y=None,
          params: LstmParams | None = None) -> TrainResult:
    """Mini-batch Adam over consecutive, unshuffled batches.

    History rows are (epoch, train MSE, test MSE) measured after each epoch on
    the full sets; test MSE is NaN without a test set. Stops early once the
    best training loss has not improved by ``min_improvement`` for
    ``patience`` epochs.
    """
    x = np.asarray(train_x, dtype=float)
    y = np.asarray(train_y, dtype=float).reshape(-1)
    if x.ndim != 3 or x.shape[0] == 0:
        raise ValueError("training needs a non-empty (blocks, window, features) array")
    if params is None:
        params = LstmParams.initialize(x.shape[2], config.hidden, config.seed)
    else:
        params = params.copy()
    have_test = test_x is not None and len(test_x) > 0
    adam = AdamState(config.lr, config.beta1, config.beta2, config.eps)
    history: list[tuple[int, float, float]] = []
    best, best_epoch = math.inf, 0
    started = time.perf_counter()
    n = x.shape[0]
    for epoch in range(1, config.epochs + 1):
        for start in range(0, n, config.batch):
            grads, _ = gradients(params, x[start:start + config.batch], y[start:start + config.batch])
            adam_step(adam, params, grads)
        tr = loss(params, x, y)
        te = loss(params, test_x, test_y) if have_test else float("nan")
        if not math.isfinite(tr):
            raise FloatingPointError(f"training loss became non-finite at epoch {epoch}")
        params.check_finite()
        history.append((epoch, tr, te))
        if tr < best - config.min_improvement:
            best, best_epoch = tr, epoch
        elif epoch - best_epoch >= config.patience:
            break
    return TrainResult(params, history, adam, time.perf_counter() - started)


# -- model file -------------------------------------------------------------


def model_to_json(params: LstmParams, *, adam: AdamState | None = None, stats: dict | None = None,
                  window: int = 5, extra: dict | None = None) -> str:
    """Versioned JSON model file; floats use shortest round-trip repr."""
    adam = adam or AdamState()
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "input_dim": params.input_dim,
        "hidden_dim": params.hidden_dim,
        "window": window,
        "adam": {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps},
        "normalization": stats,
        "arrays": {
            name: {"shape": list(params[name].shape), "data": params[name].ravel().tolist()}
            for name in PARAM_NAMES
        },
    }
    if extra:
        doc["extra"] = extra
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


@dataclass
class ModelFile:
    params: LstmParams
    window: int
    adam: AdamState
    stats: dict | None
    extra: dict


def model_from_json(text: str) -> ModelFile:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a relibat LSTM model file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    arrays = {}
    for name, entry in doc["arrays"].items():
        arrays[name] = np.array(entry["data"], dtype=float).reshape(entry["shape"])
    params = LstmParams(int(doc["input_dim"]), int(doc["hidden_dim"]), arrays)
    a = doc["adam"]
    return ModelFile(params, int(doc["window"]), AdamState(a["lr"], a["beta1"], a["beta2"], a["eps"]),
                     doc.get("normalization"), doc.get("extra", {}))
