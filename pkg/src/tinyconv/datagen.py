"""Labeled dataset generation: uniform meshes and Gaussian-process sequences.

Meshes are equally spaced either in the raw code domain (spanning the full
bit width) or, with the inverse refinement, in the converted domain spanning
exactly the operating range, mapped back through the inverse routines.

Sequence data is drawn from a zero-mean GP with a Matern-5/2 kernel at unit
index spacing, range-filled with an exact affine transform, inverted to raw
codes, and labeled by the forward oracle.  Every stored target is the
forward oracle applied to the stored input row, bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.random import default_rng

from . import oracle
from .errors import ConstantSequenceError, FactorizationError
from .oracle import (
    ADC_H_MAX,
    ADC_P_MAX,
    ADC_T_MAX,
    RANGES,
    CalibrationConstants,
)

# Input column layout per quantity; the leading column is always adc_t.
INPUT_COLUMNS = {
    "temperature": ["adc_t"],
    "pressure": ["adc_t", "adc_p"],
    "humidity": ["adc_t", "adc_h"],
}

_RAW_FULL = {
    "temperature": [float(ADC_T_MAX)],
    "pressure": [float(ADC_T_MAX), float(ADC_P_MAX)],
    "humidity": [float(ADC_T_MAX), float(ADC_H_MAX)],
}

_CHOL_JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
_BLOCK_LIMIT = 2000
_BLOCK_SIZE = 500
_BLOCK_OVERLAP = 100


@dataclass(frozen=True)
class MeshSpec:
    levels: int
    inverse_refined: bool = False

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("mesh needs at least 2 levels per dimension")


@dataclass(frozen=True)
class SequenceSpec:
    length: int
    lengthscale: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("sequence length must be >= 1")
        if self.lengthscale <= 0.0:
            raise ValueError("lengthscale must be positive")


@dataclass
class Dataset:
    quantity: str
    kind: str  # "mesh" | "sequence"
    inputs: np.ndarray   # (N, d) raw codes, real valued
    targets: np.ndarray  # (N,) converted values
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.ndim != 2 or len(self.inputs) != len(self.targets):
            raise ValueError("inputs must be (N, d) matching targets")

    @property
    def n(self) -> int:
        return len(self.targets)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def apply_oracle(quantity: str, inputs: np.ndarray, calib: CalibrationConstants) -> np.ndarray:
    """Forward-convert raw input rows; the single source of truth for labels."""
    inputs = np.asarray(inputs, dtype=float)
    if quantity == "temperature":
        temps, _ = oracle.convert_temperature(inputs[:, 0], calib)
        return np.asarray(temps, dtype=float)
    if quantity == "pressure":
        _, t_fine = oracle.convert_temperature(inputs[:, 0], calib)
        return np.asarray(oracle.convert_pressure(inputs[:, 1], t_fine, calib), dtype=float)
    if quantity == "humidity":
        temps, _ = oracle.convert_temperature(inputs[:, 0], calib)
        return np.asarray(oracle.convert_humidity(inputs[:, 1], temps, calib), dtype=float)
    raise ValueError(f"unknown quantity {quantity!r}")


# ---------------------------------------------------------------------------
# Meshes
# ---------------------------------------------------------------------------


def _mesh_axes_raw(quantity: str, levels: int) -> list[np.ndarray]:
    return [np.linspace(0.0, top, levels) for top in _RAW_FULL[quantity]]


def _mesh_axes_refined(quantity: str, levels: int, calib) -> list[np.ndarray]:
    """Axes of raw codes whose conversions are equally spaced over the range."""
    rng_t = RANGES["temperature"]
    t_grid = np.linspace(rng_t.min, rng_t.max, levels)
    adc_t = oracle.invert_temperature_many(t_grid, calib)
    if quantity == "temperature":
        return [adc_t]
    # The companion axis is inverted per temperature level further below,
    # so here only the converted-domain grid is returned for it.
    rng_q = RANGES[quantity]
    return [adc_t, np.linspace(rng_q.min, rng_q.max, levels)]


def generate_mesh(quantity: str, spec: MeshSpec, calib: CalibrationConstants) -> Dataset:
    """levels^d labeled grid points for the quantity."""
    levels = spec.levels
    meta = {"spec": {"kind": "mesh", "levels": levels, "inverse_refined": spec.inverse_refined}}
    if not spec.inverse_refined:
        axes = _mesh_axes_raw(quantity, levels)
        if len(axes) == 1:
            inputs = axes[0][:, None]
        else:
            g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
            inputs = np.column_stack([g0.ravel(), g1.ravel()])
        return Dataset(quantity, "mesh", inputs, apply_oracle(quantity, inputs, calib), meta)

    axes = _mesh_axes_refined(quantity, levels, calib)
    adc_t = axes[0]
    if quantity == "temperature":
        inputs = adc_t[:, None]
    else:
        conv_grid = axes[1]
        _, t_fine = oracle.convert_temperature(adc_t, calib)
        temps, _ = oracle.convert_temperature(adc_t, calib)
        rows = []
        for i in range(levels):
            if quantity == "pressure":
                codes = oracle.invert_pressure_many(
                    conv_grid, np.full(levels, t_fine[i]), calib)
            else:
                codes = oracle.invert_humidity_many(
                    conv_grid, np.full(levels, temps[i]), calib)
            rows.append(np.column_stack([np.full(levels, adc_t[i]), codes]))
        inputs = np.vstack(rows)
    return Dataset(quantity, "mesh", inputs, apply_oracle(quantity, inputs, calib), meta)


# ---------------------------------------------------------------------------
# Gaussian-process sequences
# ---------------------------------------------------------------------------


def matern52(r, lengthscale: float):
    """Matern-5/2 correlation at distance r."""
    s = math.sqrt(5.0) * np.abs(r) / lengthscale
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


def _gram(idx_a: np.ndarray, idx_b: np.ndarray, lengthscale: float) -> np.ndarray:
    return matern52(idx_a[:, None] - idx_b[None, :], lengthscale)


def _chol_jitter(gram: np.ndarray) -> np.ndarray:
    n = len(gram)
    for jitter in _CHOL_JITTERS:
        try:
            return np.linalg.cholesky(gram + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError("kernel matrix not positive definite after jitter escalation")


def sample_gp_sequence(spec: SequenceSpec) -> np.ndarray:
    """One zero-mean GP draw at indices 0..N-1, deterministic given the seed.

    Exact Cholesky sampling up to 2000 points; longer sequences use blocked
    conditional sampling (500-point blocks conditioned on the previous 100),
    which preserves the covariance to well beyond the kernel's reach.
    """
    rng = default_rng(spec.seed)
    n, ell = spec.length, spec.lengthscale
    if n <= _BLOCK_LIMIT:
        idx = np.arange(n, dtype=float)
        chol = _chol_jitter(_gram(idx, idx, ell))
        return chol @ rng.standard_normal(n)

    out = np.empty(n)
    first = np.arange(_BLOCK_SIZE, dtype=float)
    chol = _chol_jitter(_gram(first, first, ell))
    out[:_BLOCK_SIZE] = chol @ rng.standard_normal(_BLOCK_SIZE)
    pos = _BLOCK_SIZE
    while pos < n:
        m = min(_BLOCK_SIZE, n - pos)
        past = np.arange(pos - _BLOCK_OVERLAP, pos, dtype=float)
        new = np.arange(pos, pos + m, dtype=float)
        k_pp = _gram(past, past, ell)
        k_np = _gram(new, past, ell)
        k_nn = _gram(new, new, ell)
        chol_pp = _chol_jitter(k_pp)
        # A = K_np K_pp^-1 via two triangular solves.
        tmp = np.linalg.solve(chol_pp, k_np.T)
        a_t = np.linalg.solve(chol_pp.T, tmp)
        mean = a_t.T @ out[pos - _BLOCK_OVERLAP:pos]
        cov = k_nn - k_np @ a_t
        chol = _chol_jitter(0.5 * (cov + cov.T))
        out[pos:pos + m] = mean + chol @ rng.standard_normal(m)
        pos += m
    return out


def fill_range_transform(seq, target_min: float, target_max: float) -> np.ndarray:
    """Affine map making min(seq) -> target_min and max(seq) -> target_max exactly."""
    seq = np.asarray(seq, dtype=float)
    lo, hi = seq.min(), seq.max()
    if not hi > lo:
        raise ConstantSequenceError("sequence has no spread to range-fill")
    u = (seq - lo) / (hi - lo)  # endpoints land on exactly 0 and 1
    return target_min * (1.0 - u) + target_max * u


def generate_sequence_dataset(
    quantity: str, spec: SequenceSpec, calib: CalibrationConstants
) -> Dataset:
    """N labeled rows whose converted values follow independent GP draws.

    Dimension i of the input row uses sub-seed spec.seed + i.  Each draw is
    range-filled over its own quantity's operating range and inverted to raw
    codes, with the companion temperature fixed per point at its own
    sequence value.
    """
    if spec.length < 2:
        raise ValueError("sequence datasets need at least 2 points")
    columns = INPUT_COLUMNS[quantity]
    draws = []
    for i in range(len(columns)):
        sub = SequenceSpec(spec.length, spec.lengthscale, spec.seed + i)
        draws.append(sample_gp_sequence(sub))

    rng_t = RANGES["temperature"]
    conv_t = fill_range_transform(draws[0], rng_t.min, rng_t.max)
    adc_t = oracle.invert_temperature_many(conv_t, calib)
    if quantity == "temperature":
        inputs = adc_t[:, None]
    else:
        rng_q = RANGES[quantity]
        conv_q = fill_range_transform(draws[1], rng_q.min, rng_q.max)
        temps, t_fine = oracle.convert_temperature(adc_t, calib)
        if quantity == "pressure":
            codes = oracle.invert_pressure_many(conv_q, t_fine, calib)
        else:
            codes = oracle.invert_humidity_many(conv_q, temps, calib)
        inputs = np.column_stack([adc_t, codes])
    meta = {
        "spec": {
            "kind": "sequence",
            "length": spec.length,
            "lengthscale": spec.lengthscale,
        },
        "seed": spec.seed,
    }
    return Dataset(quantity, "sequence", inputs, apply_oracle(quantity, inputs, calib), meta)


def quantize_dataset(ds: Dataset, calib: CalibrationConstants) -> Dataset:
    """Round inputs to integer codes and relabel, for raw-like exports."""
    inputs = np.rint(ds.inputs)
    meta = dict(ds.meta)
    meta["quantized"] = True
    return Dataset(ds.quantity, ds.kind, inputs, apply_oracle(ds.quantity, inputs, calib), meta)


# ---------------------------------------------------------------------------
# File I/O: CSV with header + JSON sidecar
# ---------------------------------------------------------------------------


def save_dataset(ds: Dataset, csv_path) -> None:
    csv_path = Path(csv_path)
    cols = INPUT_COLUMNS[ds.quantity]
    lines = [",".join(cols + ["target"])]
    for row, t in zip(ds.inputs, ds.targets):
        lines.append(",".join(repr(float(v)) for v in row) + f",{float(t)!r}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = {
        "quantity": ds.quantity,
        "kind": ds.kind,
        "spec": ds.meta.get("spec", {}),
        "seed": ds.meta.get("seed"),
    }
    csv_path.with_suffix(".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_dataset(csv_path) -> Dataset:
    csv_path = Path(csv_path)
    sidecar = json.loads(csv_path.with_suffix(".json").read_text(encoding="utf-8"))
    rows = csv_path.read_text(encoding="utf-8").strip().splitlines()
    header = rows[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in rows[1:]])
    quantity = sidecar["quantity"]
    if header != INPUT_COLUMNS[quantity] + ["target"]:
        raise ValueError(f"unexpected dataset header {header}")
    meta = {"spec": sidecar.get("spec", {}), "seed": sidecar.get("seed")}
    return Dataset(quantity, sidecar["kind"], data[:, :-1], data[:, -1], meta)
