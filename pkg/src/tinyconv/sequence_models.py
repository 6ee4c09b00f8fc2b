"""Stateful per-step models: exogenous-input ARMA and scalar recurrent cells
(simple RNN, GRU in the Chung arrangement, and a half GRU without the update
gate), trained free-running by backpropagation through time.

All models operate on inputs and outputs scaled to [0, 1]; the stored
scalers map to and from raw codes / converted units.  Hidden state is a
single scalar ("history vector of length one"); ARMA state is a ring buffer
of its own previous outputs plus lagged inputs.

The step functions here are the reference semantics; the numba kernels
mirror them operation for operation so training and bulk evaluation run at
native speed while remaining bit-compatible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numpy.random import default_rng

from .datagen import Dataset
from .surrogates import AffineScaler
from .training import OptimizerConfig, fit_adam

PHI_CODES = {"tanh": 0, "relu": 1}
SIG_CODES = {"sigmoid": 0, "softsign": 1}

# Parameter vector layouts (flat, float64):
#   arma(p, q, d):   [a_1..a_p, b_{0,0}..b_{0,d-1}, ..., b_{q-1,0}.., bias]
#   simple_rnn(d):   [w_x0..w_x{d-1}, w_h, b]
#   gru(d):          [z gate | r gate | candidate], each [w_x (d), w_h, b]
#   half_gru(d):     [r gate | candidate]


@dataclass
class ArmaModel:
    p: int
    q: int
    params: np.ndarray
    in_scaler: AffineScaler
    out_lo: float
    out_span: float
    fit_info: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.in_scaler.lo)

    @property
    def a(self) -> np.ndarray:
        return self.params[: self.p]

    @property
    def b(self) -> np.ndarray:
        return self.params[self.p: self.p + self.q * self.dim].reshape(self.q, self.dim)

    @property
    def bias(self) -> float:
        return float(self.params[-1])

    def to_dict(self) -> dict:
        return {
            "p": self.p, "q": self.q,
            "params": list(map(float, self.params)),
            "in_scaler": self.in_scaler.to_dict(),
            "out_lo": float(self.out_lo), "out_span": float(self.out_span),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArmaModel":
        return cls(int(d["p"]), int(d["q"]), np.array(d["params"], dtype=float),
                   AffineScaler.from_dict(d["in_scaler"]),
                   float(d["out_lo"]), float(d["out_span"]))


@dataclass
class RecurrentCell:
    variant: str  # simple_rnn | gru | half_gru
    phi: str      # tanh | relu
    sig: str      # sigmoid | softsign (gate squash; unused by simple_rnn)
    params: np.ndarray
    in_scaler: AffineScaler
    out_lo: float
    out_span: float
    fit_info: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.in_scaler.lo)

    def gates(self):
        """Split params into per-gate (w_x, w_h, b) triples, in layout order."""
        d = self.dim
        width = d + 2
        out = []
        for g in range(len(self.params) // width):
            chunk = self.params[g * width:(g + 1) * width]
            out.append((chunk[:d], float(chunk[d]), float(chunk[d + 1])))
        return out

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "phi": self.phi, "sig": self.sig,
            "params": list(map(float, self.params)),
            "in_scaler": self.in_scaler.to_dict(),
            "out_lo": float(self.out_lo), "out_span": float(self.out_span),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecurrentCell":
        return cls(d["variant"], d["phi"], d["sig"], np.array(d["params"], dtype=float),
                   AffineScaler.from_dict(d["in_scaler"]),
                   float(d["out_lo"]), float(d["out_span"]))


@dataclass
class SequenceState:
    """Mutable per-sequence state threaded through the step functions."""

    y_hist: np.ndarray  # previous outputs, most recent first (ARMA)
    x_hist: np.ndarray  # previous input rows, most recent first, (q-1, d)
    h: float = 0.0      # hidden scalar (cells)
    step: int = 0


def initial_state(model) -> SequenceState:
    if isinstance(model, ArmaModel):
        return SequenceState(np.zeros(model.p), np.zeros((max(model.q - 1, 0), model.dim)))
    return SequenceState(np.zeros(0), np.zeros((0, 0)))


# ---------------------------------------------------------------------------
# Reference step semantics (scaled space)
# ---------------------------------------------------------------------------


def _phi(kind: str, x: float) -> float:
    if kind == "tanh":
        return math.tanh(x)
    return x if x > 0.0 else 0.0


def _squash(kind: str, x: float) -> float:
    if kind == "sigmoid":
        e = math.exp(-abs(x))  # overflow-free either side
        return e / (1.0 + e) if x < 0.0 else 1.0 / (1.0 + e)
    return x / (1.0 + abs(x))


def arma_step(model: ArmaModel, state: SequenceState, x_t) -> tuple[float, SequenceState]:
    """One exogenous-input ARMA step over scaled values."""
    x_t = np.asarray(x_t, dtype=float)
    a, b = model.a, model.b
    y = 0.0
    for i in range(model.p):
        y += float(a[i]) * float(state.y_hist[i])
    for k in range(model.dim):
        y += float(b[0, k]) * float(x_t[k])
    for j in range(1, model.q):
        for k in range(model.dim):
            y += float(b[j, k]) * float(state.x_hist[j - 1, k])
    y += model.bias
    new_y = np.concatenate([[y], state.y_hist[:-1]]) if model.p else state.y_hist
    new_x = (np.vstack([x_t[None, :], state.x_hist[:-1]])
             if model.q > 1 else state.x_hist)
    return y, SequenceState(new_y, new_x, 0.0, state.step + 1)


def cell_step(model: RecurrentCell, h: float, x_t) -> tuple[float, float]:
    """One recurrent-cell step over scaled values; returns (y_t, h')."""
    x_t = np.asarray(x_t, dtype=float)
    d = model.dim

    def affine(w_x, w_h, b, h_term):
        acc = float(w_x[0]) * float(x_t[0])
        for k in range(1, d):
            acc += float(w_x[k]) * float(x_t[k])
        acc += w_h * h_term
        return acc + b

    gates = model.gates()
    if model.variant == "simple_rnn":
        (w_x, w_h, b), = gates
        h_new = _phi(model.phi, affine(w_x, w_h, b, h))
        return h_new, h_new
    if model.variant == "gru":
        (zw, zh, zb), (rw, rh, rb), (cw, ch, cb) = gates
        z = _squash(model.sig, affine(zw, zh, zb, h))
        r = _squash(model.sig, affine(rw, rh, rb, h))
        hc = _phi(model.phi, affine(cw, ch, cb, r * h))
        h_new = h + z * (hc - h)
        return h_new, h_new
    if model.variant == "half_gru":
        (rw, rh, rb), (cw, ch, cb) = gates
        r = _squash(model.sig, affine(rw, rh, rb, h))
        h_new = _phi(model.phi, affine(cw, ch, cb, r * h))
        return h_new, h_new
    raise ValueError(f"unknown cell variant {model.variant!r}")


# ---------------------------------------------------------------------------
# Numba kernels: forward passes and BPTT gradients
# ---------------------------------------------------------------------------


@njit(cache=True)
def _nb_phi(code, x):
    if code == 0:
        return math.tanh(x)
    return x if x > 0.0 else 0.0


@njit(cache=True)
def _nb_phi_deriv(code, pre, act):
    if code == 0:
        return 1.0 - act * act
    return 1.0 if pre > 0.0 else 0.0


@njit(cache=True)
def _nb_squash(code, x):
    if code == 0:
        e = math.exp(-abs(x))
        return e / (1.0 + e) if x < 0.0 else 1.0 / (1.0 + e)
    return x / (1.0 + abs(x))


@njit(cache=True)
def _nb_squash_deriv(code, pre, act):
    if code == 0:
        return act * (1.0 - act)
    t = 1.0 + abs(pre)
    return 1.0 / (t * t)


@njit(cache=True)
def _arma_forward(params, x, p, q):
    t_len, d = x.shape
    y = np.zeros(t_len)
    bias = params[p + q * d]
    for t in range(t_len):
        acc = 0.0
        for i in range(p):
            if t - 1 - i >= 0:
                acc += params[i] * y[t - 1 - i]
        for j in range(q):
            if t - j >= 0:
                for k in range(d):
                    acc += params[p + j * d + k] * x[t - j, k]
        y[t] = acc + bias
    return y


@njit(cache=True)
def _arma_loss_grad(params, x, targets, p, q):
    t_len, d = x.shape
    y = _arma_forward(params, x, p, q)
    grad = np.zeros_like(params)
    g = np.zeros(t_len)
    mse = 0.0
    for t in range(t_len):
        e = y[t] - targets[t]
        mse += e * e
    mse /= t_len
    for t in range(t_len - 1, -1, -1):
        acc = 2.0 * (y[t] - targets[t]) / t_len
        for i in range(p):
            if t + 1 + i < t_len:
                acc += params[i] * g[t + 1 + i]
        g[t] = acc
        for i in range(p):
            if t - 1 - i >= 0:
                grad[i] += acc * y[t - 1 - i]
        for j in range(q):
            if t - j >= 0:
                for k in range(d):
                    grad[p + j * d + k] += acc * x[t - j, k]
        grad[p + q * d] += acc
    return mse, grad


@njit(cache=True)
def _rnn_forward(params, x, phi):
    t_len, d = x.shape
    y = np.zeros(t_len)
    h = 0.0
    for t in range(t_len):
        acc = params[0] * x[t, 0]
        for k in range(1, d):
            acc += params[k] * x[t, k]
        acc += params[d] * h
        acc += params[d + 1]
        h = _nb_phi(phi, acc)
        y[t] = h
    return y


@njit(cache=True)
def _rnn_loss_grad(params, x, targets, phi):
    t_len, d = x.shape
    pre = np.zeros(t_len)
    hs = np.zeros(t_len + 1)
    for t in range(t_len):
        acc = params[0] * x[t, 0]
        for k in range(1, d):
            acc += params[k] * x[t, k]
        acc += params[d] * hs[t]
        acc += params[d + 1]
        pre[t] = acc
        hs[t + 1] = _nb_phi(phi, acc)
    mse = 0.0
    for t in range(t_len):
        e = hs[t + 1] - targets[t]
        mse += e * e
    mse /= t_len
    grad = np.zeros_like(params)
    dh = 0.0
    for t in range(t_len - 1, -1, -1):
        m = 2.0 * (hs[t + 1] - targets[t]) / t_len + dh
        da = m * _nb_phi_deriv(phi, pre[t], hs[t + 1])
        for k in range(d):
            grad[k] += da * x[t, k]
        grad[d] += da * hs[t]
        grad[d + 1] += da
        dh = da * params[d]
    return mse, grad


@njit(cache=True)
def _gru_forward(params, x, phi, sig):
    t_len, d = x.shape
    w = d + 2
    y = np.zeros(t_len)
    h = 0.0
    for t in range(t_len):
        az = params[0] * x[t, 0]
        for k in range(1, d):
            az += params[k] * x[t, k]
        az += params[d] * h
        az += params[d + 1]
        z = _nb_squash(sig, az)
        ar = params[w] * x[t, 0]
        for k in range(1, d):
            ar += params[w + k] * x[t, k]
        ar += params[w + d] * h
        ar += params[w + d + 1]
        r = _nb_squash(sig, ar)
        ac = params[2 * w] * x[t, 0]
        for k in range(1, d):
            ac += params[2 * w + k] * x[t, k]
        ac += params[2 * w + d] * (r * h)
        ac += params[2 * w + d + 1]
        hc = _nb_phi(phi, ac)
        h = h + z * (hc - h)
        y[t] = h
    return y


@njit(cache=True)
def _gru_loss_grad(params, x, targets, phi, sig):
    t_len, d = x.shape
    w = d + 2
    azs = np.zeros(t_len); ars = np.zeros(t_len); acs = np.zeros(t_len)
    zs = np.zeros(t_len); rs = np.zeros(t_len); hcs = np.zeros(t_len)
    hs = np.zeros(t_len + 1)
    for t in range(t_len):
        h = hs[t]
        az = params[0] * x[t, 0]
        for k in range(1, d):
            az += params[k] * x[t, k]
        az += params[d] * h
        az += params[d + 1]
        z = _nb_squash(sig, az)
        ar = params[w] * x[t, 0]
        for k in range(1, d):
            ar += params[w + k] * x[t, k]
        ar += params[w + d] * h
        ar += params[w + d + 1]
        r = _nb_squash(sig, ar)
        ac = params[2 * w] * x[t, 0]
        for k in range(1, d):
            ac += params[2 * w + k] * x[t, k]
        ac += params[2 * w + d] * (r * h)
        ac += params[2 * w + d + 1]
        hc = _nb_phi(phi, ac)
        azs[t] = az; ars[t] = ar; acs[t] = ac
        zs[t] = z; rs[t] = r; hcs[t] = hc
        hs[t + 1] = h + z * (hc - h)
    mse = 0.0
    for t in range(t_len):
        e = hs[t + 1] - targets[t]
        mse += e * e
    mse /= t_len
    grad = np.zeros_like(params)
    dh = 0.0
    for t in range(t_len - 1, -1, -1):
        h = hs[t]
        m = 2.0 * (hs[t + 1] - targets[t]) / t_len + dh
        dz = m * (hcs[t] - h)
        dhc = m * zs[t]
        dac = dhc * _nb_phi_deriv(phi, acs[t], hcs[t])
        dr = dac * params[2 * w + d] * h
        dar = dr * _nb_squash_deriv(sig, ars[t], rs[t])
        daz = dz * _nb_squash_deriv(sig, azs[t], zs[t])
        for k in range(d):
            grad[k] += daz * x[t, k]
            grad[w + k] += dar * x[t, k]
            grad[2 * w + k] += dac * x[t, k]
        grad[d] += daz * h
        grad[w + d] += dar * h
        grad[2 * w + d] += dac * (rs[t] * h)
        grad[d + 1] += daz
        grad[w + d + 1] += dar
        grad[2 * w + d + 1] += dac
        dh = (m * (1.0 - zs[t]) + dac * params[2 * w + d] * rs[t]
              + dar * params[w + d] + daz * params[d])
    return mse, grad


@njit(cache=True)
def _half_gru_forward(params, x, phi, sig):
    t_len, d = x.shape
    w = d + 2
    y = np.zeros(t_len)
    h = 0.0
    for t in range(t_len):
        ar = params[0] * x[t, 0]
        for k in range(1, d):
            ar += params[k] * x[t, k]
        ar += params[d] * h
        ar += params[d + 1]
        r = _nb_squash(sig, ar)
        ac = params[w] * x[t, 0]
        for k in range(1, d):
            ac += params[w + k] * x[t, k]
        ac += params[w + d] * (r * h)
        ac += params[w + d + 1]
        h = _nb_phi(phi, ac)
        y[t] = h
    return y


@njit(cache=True)
def _half_gru_loss_grad(params, x, targets, phi, sig):
    t_len, d = x.shape
    w = d + 2
    ars = np.zeros(t_len); acs = np.zeros(t_len); rs = np.zeros(t_len)
    hs = np.zeros(t_len + 1)
    for t in range(t_len):
        h = hs[t]
        ar = params[0] * x[t, 0]
        for k in range(1, d):
            ar += params[k] * x[t, k]
        ar += params[d] * h
        ar += params[d + 1]
        r = _nb_squash(sig, ar)
        ac = params[w] * x[t, 0]
        for k in range(1, d):
            ac += params[w + k] * x[t, k]
        ac += params[w + d] * (r * h)
        ac += params[w + d + 1]
        ars[t] = ar; acs[t] = ac; rs[t] = r
        hs[t + 1] = _nb_phi(phi, ac)
    mse = 0.0
    for t in range(t_len):
        e = hs[t + 1] - targets[t]
        mse += e * e
    mse /= t_len
    grad = np.zeros_like(params)
    dh = 0.0
    for t in range(t_len - 1, -1, -1):
        h = hs[t]
        m = 2.0 * (hs[t + 1] - targets[t]) / t_len + dh
        dac = m * _nb_phi_deriv(phi, acs[t], hs[t + 1])
        dr = dac * params[w + d] * h
        dar = dr * _nb_squash_deriv(sig, ars[t], rs[t])
        for k in range(d):
            grad[k] += dar * x[t, k]
            grad[w + k] += dac * x[t, k]
        grad[d] += dar * h
        grad[w + d] += dac * (rs[t] * h)
        grad[d + 1] += dar
        grad[w + d + 1] += dac
        dh = dac * params[w + d] * rs[t] + dar * params[d]
    return mse, grad


# ---------------------------------------------------------------------------
# Training and bulk prediction
# ---------------------------------------------------------------------------


def _scaled_training_arrays(data: Dataset):
    scaler = AffineScaler.from_data(data.inputs)
    x = scaler.scale(data.inputs)
    out_lo = float(data.targets.min())
    out_span = float(data.targets.max() - data.targets.min()) or 1.0
    y = (data.targets - out_lo) / out_span
    return scaler, x, y, out_lo, out_span


def _init_params(n_params: int, fan_in: int, bias_idx, seed: int,
                 recurrent_idx=(), gate_bias_idx=()) -> np.ndarray:
    rng = default_rng(seed)
    params = rng.uniform(-0.5, 0.5, n_params) / math.sqrt(fan_in)
    # recurrent weights start small so the zero-state map contracts at init;
    # unbounded activations otherwise overflow on 5000-step sequences
    for idx in recurrent_idx:
        params[idx] *= 0.1
    for idx in bias_idx:
        params[idx] = 0.01
    # gates open positive at init; a signed squash (softsign) makes the
    # update otherwise expansive from the very first epoch
    for idx in gate_bias_idx:
        params[idx] = 0.5
    return params


def train_arma(data: Dataset, p: int, q: int, seed: int,
               max_epochs: int = 20_000,
               config: OptimizerConfig = OptimizerConfig()) -> ArmaModel:
    if data.kind != "sequence":
        raise ValueError("sequence models train on sequence datasets")
    if p < 0 or q < 1:
        raise ValueError("need p >= 0 and q >= 1")
    scaler, x, y, out_lo, out_span = _scaled_training_arrays(data)
    d = x.shape[1]
    n_params = p + q * d + 1
    params0 = _init_params(n_params, p + q * d + 1, [n_params - 1], seed)
    params, epochs, best = fit_adam(
        lambda th: _arma_loss_grad(th, x, y, p, q), params0, max_epochs, config)
    model = ArmaModel(p, q, params, scaler, out_lo, out_span)
    model.fit_info = {"epochs": epochs, "train_nrmse": float(best), "seed": seed}
    return model


def train_cell(data: Dataset, variant: str, phi: str, sig: str, seed: int,
               max_epochs: int = 20_000,
               config: OptimizerConfig = OptimizerConfig()) -> RecurrentCell:
    if data.kind != "sequence":
        raise ValueError("sequence models train on sequence datasets")
    scaler, x, y, out_lo, out_span = _scaled_training_arrays(data)
    d = x.shape[1]
    width = d + 2
    n_gates = {"simple_rnn": 1, "gru": 3, "half_gru": 2}[variant]
    phi_c, sig_c = PHI_CODES[phi], SIG_CODES[sig]
    n_squash = {"simple_rnn": 0, "gru": 2, "half_gru": 1}[variant]
    bias_idx = [g * width + d + 1 for g in range(n_squash, n_gates)]
    gate_bias_idx = [g * width + d + 1 for g in range(n_squash)]
    recurrent_idx = [g * width + d for g in range(n_gates)]
    params0 = _init_params(n_gates * width, d + 1, bias_idx, seed,
                           recurrent_idx, gate_bias_idx)
    if variant == "simple_rnn":
        fn = lambda th: _rnn_loss_grad(th, x, y, phi_c)
    elif variant == "gru":
        fn = lambda th: _gru_loss_grad(th, x, y, phi_c, sig_c)
    else:
        fn = lambda th: _half_gru_loss_grad(th, x, y, phi_c, sig_c)
    params, epochs, best = fit_adam(fn, params0, max_epochs, config)
    model = RecurrentCell(variant, phi, sig, params, scaler, out_lo, out_span)
    model.fit_info = {"epochs": epochs, "train_nrmse": float(best), "seed": seed}
    return model


def forward_scaled(model, x_scaled: np.ndarray) -> np.ndarray:
    """Run a whole scaled sequence from zero state (native-speed path)."""
    x_scaled = np.ascontiguousarray(x_scaled, dtype=float)
    if isinstance(model, ArmaModel):
        return _arma_forward(model.params, x_scaled, model.p, model.q)
    phi_c = PHI_CODES[model.phi]
    sig_c = SIG_CODES[model.sig]
    if model.variant == "simple_rnn":
        return _rnn_forward(model.params, x_scaled, phi_c)
    if model.variant == "gru":
        return _gru_forward(model.params, x_scaled, phi_c, sig_c)
    return _half_gru_forward(model.params, x_scaled, phi_c, sig_c)


def predict_sequence(model, inputs: np.ndarray) -> np.ndarray:
    """Predict converted values along a raw-code input sequence."""
    x = model.in_scaler.scale(np.atleast_2d(np.asarray(inputs, dtype=float)))
    y = forward_scaled(model, x)
    return model.out_lo + y * model.out_span


def stability_probe(model, steps: int = 10_000, bound: float = 10.0) -> bool:
    """Feed a constant mid-range input; True if |y| stays within bound
    (10x the scaled range).  Flags unstable models without failing training.
    """
    d = model.dim
    x = np.full((steps, d), 0.5)
    y = forward_scaled(model, x)
    return bool(np.all(np.isfinite(y)) and np.max(np.abs(y)) <= bound)
