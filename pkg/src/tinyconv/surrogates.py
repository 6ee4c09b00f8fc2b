"""Function-approximation families: linear, quadratic, interpolation LUT,
Gaussian-process regression, and small feed-forward RELU networks.

All families fit from a Dataset and predict pointwise.  Linear and quadratic
models store coefficients over raw-code monomials (the solve happens in a
rescaled basis for conditioning and is expanded back exactly).  The LUT
stores grid targets verbatim.  GP and network models carry their affine
input/output scalers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import default_rng
from scipy.linalg import cho_factor, cho_solve

from .datagen import Dataset
from .errors import FactorizationError, NonGridDataError, RankDeficiencyError
from .training import OptimizerConfig, fit_adam

_GRID_TOL = 1e-6  # relative tolerance for recognizing a uniform grid


@dataclass
class AffineScaler:
    """Maps x -> (x - lo) / span, per dimension."""

    lo: np.ndarray
    span: np.ndarray

    @classmethod
    def from_data(cls, values: np.ndarray) -> "AffineScaler":
        values = np.atleast_2d(values)
        lo = values.min(axis=0)
        span = values.max(axis=0) - lo
        span = np.where(span > 0.0, span, 1.0)
        return cls(lo.astype(float), span.astype(float))

    def scale(self, x: np.ndarray) -> np.ndarray:
        return (x - self.lo) / self.span

    def unscale(self, u: np.ndarray) -> np.ndarray:
        return self.lo + u * self.span

    def to_dict(self) -> dict:
        return {"lo": list(map(float, np.ravel(self.lo))),
                "span": list(map(float, np.ravel(self.span)))}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineScaler":
        return cls(np.array(d["lo"], dtype=float), np.array(d["span"], dtype=float))


# ---------------------------------------------------------------------------
# Linear / quadratic regression
# ---------------------------------------------------------------------------

# Monomial ordering (documented, fixed):
#   d=1: [1, x, x^2]
#   d=2: [1, x0, x1, x0^2, x0*x1, x1^2]


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    fit_info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"weights": list(map(float, self.weights)), "bias": float(self.bias)}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.array(d["weights"], dtype=float), float(d["bias"]))


@dataclass
class QuadraticModel:
    coeffs: np.ndarray  # over the monomial ordering above
    fit_info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"coeffs": list(map(float, self.coeffs))}

    @classmethod
    def from_dict(cls, d: dict) -> "QuadraticModel":
        return cls(np.array(d["coeffs"], dtype=float))


def _canonical_order(inputs: np.ndarray, targets: np.ndarray):
    """Sort rows lexicographically so fits are row-order independent."""
    keys = tuple([targets] + [inputs[:, k] for k in range(inputs.shape[1] - 1, -1, -1)])
    order = np.lexsort(keys)
    return inputs[order], targets[order]

def _features(u: np.ndarray, degree: int) -> np.ndarray:
    n, d = u.shape
    cols = [np.ones(n)]
    cols += [u[:, k] for k in range(d)]
    if degree == 2:
        if d == 1:
            cols.append(u[:, 0] ** 2)
        else:
            cols += [u[:, 0] ** 2, u[:, 0] * u[:, 1], u[:, 1] ** 2]
    return np.column_stack(cols)


def _solve_normal_equations(phi: np.ndarray, y: np.ndarray) -> np.ndarray:
    gram = phi.T @ phi
    try:
        factor = cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(f"feature matrix is rank deficient: {exc}") from exc
    return cho_solve(factor, phi.T @ y)


def _center_halfspan(inputs: np.ndarray):
    lo = inputs.min(axis=0)
    hi = inputs.max(axis=0)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    if np.any(half == 0.0):
        raise RankDeficiencyError("an input dimension is constant")
    return mid, half


def _fit_poly(data: Dataset, degree: int) -> np.ndarray:
    inputs, targets = _canonical_order(data.inputs.copy(), data.targets.copy())
    n, d = inputs.shape
    n_params = 1 + d + (0 if degree == 1 else (1 if d == 1 else 3))
    if n < n_params:
        raise RankDeficiencyError(f"{n} rows cannot determine {n_params} parameters")
    mid, half = _center_halfspan(inputs)
    u = (inputs - mid) / half
    phi = _features(u, degree)
    coeffs = _solve_normal_equations(phi, targets)
    return _expand_to_raw(coeffs, mid, half, d, degree)


def _expand_to_raw(c: np.ndarray, mid: np.ndarray, half: np.ndarray,
                   d: int, degree: int) -> np.ndarray:
    """Rewrite a polynomial in u = (x - mid)/half as raw-x monomials (exact algebra)."""
    a = 1.0 / half
    b = -mid / half
    if degree == 1:
        w = c[1:1 + d] * a
        bias = c[0] + float(np.dot(c[1:1 + d], b))
        return np.concatenate([[bias], w])
    if d == 1:
        c0, c1, c2 = c
        return np.array([
            c0 + c1 * b[0] + c2 * b[0] ** 2,
            c1 * a[0] + 2.0 * c2 * a[0] * b[0],
            c2 * a[0] ** 2,
        ])
    c0, c1, c2, c3, c4, c5 = c
    return np.array([
        c0 + c1 * b[0] + c2 * b[1] + c3 * b[0] ** 2 + c4 * b[0] * b[1] + c5 * b[1] ** 2,
        c1 * a[0] + 2.0 * c3 * a[0] * b[0] + c4 * a[0] * b[1],
        c2 * a[1] + c4 * b[0] * a[1] + 2.0 * c5 * a[1] * b[1],
        c3 * a[0] ** 2,
        c4 * a[0] * a[1],
        c5 * a[1] ** 2,
    ])


def fit_linear(data: Dataset) -> LinearModel:
    """Exact least-squares plane via normal equations."""
    raw = _fit_poly(data, degree=1)
    return LinearModel(weights=raw[1:], bias=float(raw[0]))


def fit_quadratic(data: Dataset) -> QuadraticModel:
    """Exact least-squares degree-2 surface via normal equations."""
    return QuadraticModel(coeffs=_fit_poly(data, degree=2))


def linear_predict(model: LinearModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return x @ model.weights + model.bias


def quadratic_predict(model: QuadraticModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    c = model.coeffs
    if x.shape[1] == 1:
        t = x[:, 0]
        return c[0] + c[1] * t + c[2] * t * t
    t, p = x[:, 0], x[:, 1]
    return c[0] + c[1] * t + c[2] * p + c[3] * t * t + c[4] * t * p + c[5] * p * p


# ---------------------------------------------------------------------------
# Linear-interpolation lookup table
# ---------------------------------------------------------------------------


@dataclass
class LutModel:
    mins: np.ndarray    # (d,)
    steps: np.ndarray   # (d,)
    levels: np.ndarray  # (d,) ints
    values: np.ndarray  # (prod(levels),) row-major, first dim major
    fit_info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mins": list(map(float, self.mins)),
            "steps": list(map(float, self.steps)),
            "levels": list(map(int, self.levels)),
            "values": list(map(float, self.values)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LutModel":
        return cls(
            np.array(d["mins"], dtype=float),
            np.array(d["steps"], dtype=float),
            np.array(d["levels"], dtype=int),
            np.array(d["values"], dtype=float),
        )


def build_lut(data: Dataset) -> LutModel:
    """Store a full uniform grid verbatim; rejects anything that is not one."""
    inputs, targets = data.inputs, data.targets
    n, d = inputs.shape
    axes = []
    for k in range(d):
        ux = np.unique(inputs[:, k])
        if len(ux) < 2:
            raise NonGridDataError(f"dimension {k} has a single level")
        span = ux[-1] - ux[0]
        expect = np.linspace(ux[0], ux[-1], len(ux))
        if np.max(np.abs(ux - expect)) > _GRID_TOL * span:
            raise NonGridDataError(f"dimension {k} is not uniformly spaced")
        axes.append(ux)
    levels = np.array([len(ax) for ax in axes])
    if n != int(np.prod(levels)):
        raise NonGridDataError(f"{n} rows do not fill a {'x'.join(map(str, levels))} grid")
    mins = np.array([ax[0] for ax in axes])
    steps = np.array([(ax[-1] - ax[0]) / (len(ax) - 1) for ax in axes])
    idx = np.rint((inputs - mins) / steps).astype(int)
    if np.max(np.abs(inputs - (mins + idx * steps))) > _GRID_TOL * np.max(steps):
        raise NonGridDataError("rows do not sit on the lattice")
    flat = idx[:, 0]
    for k in range(1, d):
        flat = flat * levels[k] + idx[:, k]
    if len(np.unique(flat)) != n:
        raise NonGridDataError("duplicate lattice nodes")
    values = np.empty(n)
    values[flat] = targets
    return LutModel(mins, steps, levels, values)


def lut_predict(model: LutModel, x: np.ndarray) -> np.ndarray:
    """Interpolate; 1-D linear, 2-D barycentric over the triangle split along
    the (low,low)-(high,high) cell diagonal.  Queries outside the grid clamp
    to the bounding box.  Exact at grid nodes.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    mins, steps, levels = model.mins, model.steps, model.levels
    tops = mins + steps * (levels - 1)
    xc = np.clip(x, mins, tops)
    u = (xc - mins) / steps
    i = np.clip(np.floor(u).astype(int), 0, levels - 2)
    f = u - i
    vals = model.values
    if x.shape[1] == 1:
        i0 = i[:, 0]
        v0, v1 = vals[i0], vals[i0 + 1]
        f0 = f[:, 0]
        return (1.0 - f0) * v0 + f0 * v1
    l1 = int(levels[1])
    base = i[:, 0] * l1 + i[:, 1]
    f00 = vals[base]
    f10 = vals[base + l1]
    f01 = vals[base + 1]
    f11 = vals[base + l1 + 1]
    fu, fv = f[:, 0], f[:, 1]
    # barycentric weights over the two triangles of the
    # (low,low)-(high,high) diagonal split; exact at every vertex
    lower = fu >= fv  # triangle (0,0)-(1,0)-(1,1)
    out_lower = (1.0 - fu) * f00 + (fu - fv) * f10 + fv * f11
    out_upper = (1.0 - fv) * f00 + (fv - fu) * f01 + fu * f11
    return np.where(lower, out_lower, out_upper)


# ---------------------------------------------------------------------------
# Gaussian-process regression (Gaussian kernel, Gaussian likelihood)
# ---------------------------------------------------------------------------


@dataclass
class GpModel:
    x_scaled: np.ndarray       # (n, d) training inputs in scaled space
    alpha: np.ndarray          # (n,) = (K + noise*I)^-1 y_scaled
    lengthscales: np.ndarray   # (d,)
    signal_var: float
    noise_var: float
    in_scaler: AffineScaler
    out_offset: float
    out_scale: float
    fit_info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "x_scaled": [list(map(float, row)) for row in self.x_scaled],
            "alpha": list(map(float, self.alpha)),
            "lengthscales": list(map(float, self.lengthscales)),
            "signal_var": float(self.signal_var),
            "noise_var": float(self.noise_var),
            "in_scaler": self.in_scaler.to_dict(),
            "out_offset": float(self.out_offset),
            "out_scale": float(self.out_scale),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GpModel":
        return cls(
            np.array(d["x_scaled"], dtype=float),
            np.array(d["alpha"], dtype=float),
            np.array(d["lengthscales"], dtype=float),
            float(d["signal_var"]),
            float(d["noise_var"]),
            AffineScaler.from_dict(d["in_scaler"]),
            float(d["out_offset"]),
            float(d["out_scale"]),
        )


def _sq_dists(a: np.ndarray, b: np.ndarray, ls: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sum((diff / ls) ** 2, axis=2)


def _gp_nll(x: np.ndarray, y: np.ndarray, ls: np.ndarray,
            sig_var: float, noise_var: float) -> float:
    n = len(y)
    k = sig_var * np.exp(-0.5 * _sq_dists(x, x, ls)) + noise_var * np.eye(n)
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        return np.inf
    v = np.linalg.solve(chol, y)
    return float(0.5 * v @ v + np.sum(np.log(np.diag(chol))) + 0.5 * n * math.log(2 * math.pi))


def fit_gp(data: Dataset, fixed_noise: float | None = None) -> GpModel:
    """Analytic GP regression with hyperparameters chosen by maximizing the
    log marginal likelihood: a 20x10x8 log-space grid around data-derived
    heuristics, then multiplicative coordinate-descent refinement.
    """
    inputs, targets = data.inputs, data.targets
    n, d = inputs.shape
    if n > 9:
        raise ValueError("GP surrogates are meant for tiny meshes (n <= 9)")
    scaler = AffineScaler.from_data(inputs)
    x = scaler.scale(inputs)
    out_offset = float(np.mean(targets))
    out_scale = float(np.std(targets))
    if out_scale == 0.0:
        out_scale = 1.0
    y = (targets - out_offset) / out_scale

    diffs = _sq_dists(x, x, np.ones(d))
    nonzero = diffs[diffs > 0.0]
    ell0 = math.sqrt(float(np.median(nonzero))) if len(nonzero) else 1.0
    var0 = float(np.var(y)) or 1.0

    # The likelihood of noise-free smooth data has a degenerate ridge toward
    # ever larger lengthscale and signal variance; beyond the data diameter
    # the lengthscale is unidentifiable, so the search is capped there.
    max_ell = math.sqrt(d)
    ells = np.minimum(ell0 * np.logspace(-2, 2, 20), max_ell)
    sigs = var0 * np.logspace(-2, 2, 10)
    # Noise floor: below single precision the extra likelihood is spurious
    # and the weight vector grows without bound.
    noise_floor = 1e-6 * var0
    noises = [fixed_noise] if fixed_noise is not None else list(
        var0 * np.logspace(-6, -1, 8))

    best = (np.inf, ell0, var0, noises[0])
    for ell in ells:
        for sig in sigs:
            for nz in noises:
                nll = _gp_nll(x, y, np.full(d, ell), sig, nz)
                if nll < best[0]:
                    best = (nll, ell, sig, nz)
    _, ell, sig, nz = best
    ls = np.full(d, ell)

    def nll_of(ls_, sig_, nz_):
        return _gp_nll(x, y, ls_, sig_, nz_)

    current = nll_of(ls, sig, nz)
    factors = np.array([0.25, 0.5, 0.8, 1.25, 2.0, 4.0])
    for sweep in range(3):
        for k in range(d):
            for fac in factors:
                trial = ls.copy()
                trial[k] = min(ls[k] * fac, max_ell)
                val = nll_of(trial, sig, nz)
                if val < current:
                    current, ls = val, trial
        for fac in factors:
            val = nll_of(ls, sig * fac, nz)
            if val < current:
                current, sig = val, sig * fac
        if fixed_noise is None:
            for fac in factors:
                trial = max(nz * fac, noise_floor)
                val = nll_of(ls, sig, trial)
                if val < current:
                    current, nz = val, trial
        factors = np.sqrt(factors)

    k_mat = sig * np.exp(-0.5 * _sq_dists(x, x, ls)) + nz * np.eye(n)
    try:
        chol = np.linalg.cholesky(k_mat)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"GP kernel matrix not positive definite: {exc}") from exc
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, y))
    model = GpModel(x, alpha, ls, float(sig), float(nz), scaler, out_offset, out_scale)
    model.fit_info = {"nll": float(current)}
    return model


def gp_predict(model: GpModel, x: np.ndarray) -> np.ndarray:
    """Posterior mean sum_i alpha_i k(x, X_i), mapped back to output units.

    The sum accumulates point by point; alpha can be large for tiny fitted
    noise, and a fixed order keeps the cancellation reproducible.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = model.in_scaler.scale(x)
    e = np.exp(-0.5 * _sq_dists(u, model.x_scaled, model.lengthscales))
    coef = model.signal_var * model.alpha
    mean = coef[0] * e[:, 0]
    for i in range(1, len(coef)):
        mean = mean + coef[i] * e[:, i]
    return model.out_offset + model.out_scale * mean


# ---------------------------------------------------------------------------
# Feed-forward RELU networks
# ---------------------------------------------------------------------------


@dataclass
class MlpModel:
    weights: list          # per layer, (out, in)
    biases: list           # per layer, (out,)
    in_scaler: AffineScaler
    out_lo: float
    out_span: float
    fit_info: dict = field(default_factory=dict)

    @property
    def layer_sizes(self):
        return tuple(w.shape[0] for w in self.weights)

    def to_dict(self) -> dict:
        return {
            "weights": [[list(map(float, row)) for row in w] for w in self.weights],
            "biases": [list(map(float, b)) for b in self.biases],
            "in_scaler": self.in_scaler.to_dict(),
            "out_lo": float(self.out_lo),
            "out_span": float(self.out_span),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        return cls(
            [np.array(w, dtype=float) for w in d["weights"]],
            [np.array(b, dtype=float) for b in d["biases"]],
            AffineScaler.from_dict(d["in_scaler"]),
            float(d["out_lo"]),
            float(d["out_span"]),
        )


def _mlp_shapes(n_in: int, layers) -> list:
    shapes = []
    prev = n_in
    for width in layers:
        shapes.append((width, prev))
        prev = width
    return shapes


def _unpack(params: np.ndarray, shapes) -> tuple[list, list]:
    ws, bs, pos = [], [], 0
    for out_n, in_n in shapes:
        ws.append(params[pos:pos + out_n * in_n].reshape(out_n, in_n))
        pos += out_n * in_n
        bs.append(params[pos:pos + out_n])
        pos += out_n
    return ws, bs


def _mlp_loss_grad(params: np.ndarray, shapes, u: np.ndarray, y: np.ndarray):
    ws, bs = _unpack(params, shapes)
    acts = [u]
    pre = []
    a = u
    for w, b in zip(ws, bs):
        z = a @ w.T + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    pred = a[:, 0]
    err = pred - y
    n = len(y)
    mse = float(np.mean(err * err))

    grad = np.zeros_like(params)
    delta = (2.0 * err / n)[:, None] * (pre[-1] > 0.0)
    pos = len(params)
    for layer in range(len(ws) - 1, -1, -1):
        w = ws[layer]
        gw = delta.T @ acts[layer]
        gb = delta.sum(axis=0)
        pos -= len(gb)
        grad[pos:pos + len(gb)] = gb
        pos -= gw.size
        grad[pos:pos + gw.size] = gw.ravel()
        if layer > 0:
            delta = (delta @ w) * (pre[layer - 1] > 0.0)
    return mse, grad


def train_mlp(data: Dataset, layers, seed: int, max_epochs: int = 10_000,
              config: OptimizerConfig = OptimizerConfig()) -> MlpModel:
    """Full-batch adaptive-moment training of a RELU net (RELU on the output
    neuron as well); inputs and outputs affinely scaled to [0, 1].
    """
    layers = tuple(int(v) for v in layers)
    if not layers or layers[-1] != 1:
        raise ValueError("layer sizes must end in 1")
    inputs, targets = data.inputs, data.targets
    scaler = AffineScaler.from_data(inputs)
    u = scaler.scale(inputs)
    out_lo = float(targets.min())
    out_span = float(targets.max() - targets.min()) or 1.0
    y = (targets - out_lo) / out_span

    shapes = _mlp_shapes(inputs.shape[1], layers)
    rng = default_rng(seed)
    chunks = []
    for out_n, in_n in shapes:
        w = rng.uniform(-0.5, 0.5, size=(out_n, in_n)) / math.sqrt(in_n)
        chunks.append(w.ravel())
        chunks.append(np.full(out_n, 0.01))  # small positive bias keeps RELUs live
    params0 = np.concatenate(chunks)

    params, epochs, best = fit_adam(
        lambda p: _mlp_loss_grad(p, shapes, u, y), params0, max_epochs, config)
    ws, bs = _unpack(params, shapes)
    model = MlpModel([w.copy() for w in ws], [b.copy() for b in bs],
                     scaler, out_lo, out_span)
    model.fit_info = {"epochs": epochs, "train_nrmse": float(best), "seed": seed}
    return model


def mlp_predict(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = model.in_scaler.scale(x)
    for w, b in zip(model.weights, model.biases):
        a = np.maximum(a @ w.T + b, 0.0)
    return model.out_lo + a[:, 0] * model.out_span


def predict(model, x: np.ndarray) -> np.ndarray:
    """Pointwise prediction dispatch for the function-approximation families."""
    if isinstance(model, LinearModel):
        return linear_predict(model, x)
    if isinstance(model, QuadraticModel):
        return quadratic_predict(model, x)
    if isinstance(model, LutModel):
        return lut_predict(model, x)
    if isinstance(model, GpModel):
        return gp_predict(model, x)
    if isinstance(model, MlpModel):
        return mlp_predict(model, x)
    raise TypeError(f"not a pointwise model: {type(model).__name__}")
