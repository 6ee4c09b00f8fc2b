"""Lowering of trained models and the reference routines to the straight-line IR.

Each lowering mirrors the native predict's arithmetic order so the
interpreter reproduces native outputs to rounding error.  Input-range and
output-range metadata ride along for vector generation and reporting.
"""

from __future__ import annotations

import numpy as np

from .errors import UnsupportedConstructError
from .ir import IrBuilder, IrProgram
from .oracle import RANGES, RAW_DOMAINS, CalibrationConstants
from .sequence_models import ArmaModel, RecurrentCell
from .surrogates import GpModel, LinearModel, LutModel, MlpModel, QuadraticModel

_PHI_ACT = {"tanh": "tanh", "relu": "relu"}
_SIG_ACT = {"sigmoid": "sigmoid", "softsign": "softsign"}


def _builder(name: str, quantity: str) -> IrBuilder:
    rng = RANGES[quantity]
    return IrBuilder(name, len(RAW_DOMAINS[quantity]),
                     input_ranges=RAW_DOMAINS[quantity],
                     output_range=(rng.min, rng.max))


def lower(model, quantity: str, calib: CalibrationConstants | None = None,
          name: str | None = None) -> IrProgram:
    """Lower a model (or the string "original" plus calib) for a quantity."""
    if isinstance(model, str):
        if model != "original":
            raise UnsupportedConstructError(f"unknown reference {model!r}")
        if calib is None:
            raise UnsupportedConstructError("reference lowering needs calibration")
        return lower_reference(quantity, calib, name)
    if isinstance(model, LinearModel):
        return _lower_linear(model, quantity, name or f"{quantity}_linear")
    if isinstance(model, QuadraticModel):
        return _lower_quadratic(model, quantity, name or f"{quantity}_quadratic")
    if isinstance(model, LutModel):
        return _lower_lut(model, quantity, name or f"{quantity}_lut")
    if isinstance(model, GpModel):
        return _lower_gp(model, quantity, name or f"{quantity}_gp")
    if isinstance(model, MlpModel):
        return _lower_mlp(model, quantity, name or f"{quantity}_mlp")
    if isinstance(model, ArmaModel):
        return _lower_arma(model, quantity, name or f"{quantity}_arma")
    if isinstance(model, RecurrentCell):
        return _lower_cell(model, quantity, name or f"{quantity}_{model.variant}")
    raise UnsupportedConstructError(f"cannot lower {type(model).__name__}")


def _lower_linear(model: LinearModel, quantity: str, name: str) -> IrProgram:
    b = _builder(name, quantity)
    acc = None
    for k, w in enumerate(model.weights):
        term = b.mul(b.load_input(k), b.const(w))
        acc = term if acc is None else b.add(acc, term)
    out = b.add(acc, b.const(model.bias))
    return b.build(out)


def _lower_quadratic(model: QuadraticModel, quantity: str, name: str) -> IrProgram:
    b = _builder(name, quantity)
    c = model.coeffs
    if len(c) == 3:
        t = b.load_input(0)
        acc = b.add(b.const(c[0]), b.mul(b.const(c[1]), t))
        out = b.add(acc, b.mul(b.mul(b.const(c[2]), t), t))
        return b.build(out)
    t, p = b.load_input(0), b.load_input(1)
    acc = b.add(b.const(c[0]), b.mul(b.const(c[1]), t))
    acc = b.add(acc, b.mul(b.const(c[2]), p))
    acc = b.add(acc, b.mul(b.mul(b.const(c[3]), t), t))
    acc = b.add(acc, b.mul(b.mul(b.const(c[4]), t), p))
    acc = b.add(acc, b.mul(b.mul(b.const(c[5]), p), p))
    return b.build(acc)


def _lower_lut(model: LutModel, quantity: str, name: str) -> IrProgram:
    b = _builder(name, quantity)
    d = len(model.levels)
    tid = b.add_table(model.values, ram_resident=True)
    idx, frac = [], []
    for k in range(d):
        lo = float(model.mins[k])
        top = float(model.mins[k] + model.steps[k] * (model.levels[k] - 1))
        x = b.load_input(k)
        xc = b.minimum(b.maximum(x, b.const(lo)), b.const(top))
        u = b.div(b.sub(xc, b.const(lo)), b.const(float(model.steps[k])))
        i = b.floor_to_index(u, int(model.levels[k]) - 2)
        idx.append(i)
        frac.append(b.sub(u, i))
    if d == 1:
        v0 = b.table_read(tid, idx[0])
        v1 = b.table_read(tid, b.add(idx[0], b.const(1.0)))
        f0 = frac[0]
        out = b.add(b.mul(b.sub(b.const(1.0), f0), v0), b.mul(f0, v1))
        return b.build(out)
    l1 = int(model.levels[1])
    base = b.add(b.mul(idx[0], b.const(float(l1))), idx[1])
    r10 = b.add(base, b.const(float(l1)))
    f00 = b.table_read(tid, base)
    f10 = b.table_read(tid, r10)
    f01 = b.table_read(tid, b.add(base, b.const(1.0)))
    f11 = b.table_read(tid, b.add(r10, b.const(1.0)))
    fu, fv = frac
    one = b.const(1.0)
    lower_val = b.add(b.add(b.mul(b.sub(one, fu), f00),
                            b.mul(b.sub(fu, fv), f10)),
                      b.mul(fv, f11))
    upper_val = b.add(b.add(b.mul(b.sub(one, fv), f00),
                            b.mul(b.sub(fv, fu), f01)),
                      b.mul(fu, f11))
    in_upper = b.compare_lt(fu, fv)
    return b.build(b.select(in_upper, upper_val, lower_val))


def _scaled_inputs(b: IrBuilder, scaler) -> list[int]:
    regs = []
    for k in range(len(scaler.lo)):
        x = b.load_input(k)
        u = b.div(b.sub(x, b.const(float(scaler.lo[k]))),
                  b.const(float(scaler.span[k])))
        regs.append(u)
    return regs


def _lower_gp(model: GpModel, quantity: str, name: str) -> IrProgram:
    b = _builder(name, quantity)
    u = _scaled_inputs(b, model.in_scaler)
    d = model.x_scaled.shape[1]
    total = None
    for i in range(len(model.alpha)):
        acc = None
        for k in range(d):
            dk = b.sub(u[k], b.const(float(model.x_scaled[i, k])))
            qk = b.div(dk, b.const(float(model.lengthscales[k])))
            sq = b.mul(qk, qk)
            acc = sq if acc is None else b.add(acc, sq)
        e = b.activation("exp", b.mul(b.const(-0.5), acc))
        term = b.mul(b.const(float(model.signal_var * model.alpha[i])), e)
        total = term if total is None else b.add(total, term)
    out = b.add(b.const(model.out_offset), b.mul(b.const(model.out_scale), total))
    return b.build(out)


def _lower_mlp(model: MlpModel, quantity: str, name: str) -> IrProgram:
    b = _builder(name, quantity)
    acts = _scaled_inputs(b, model.in_scaler)
    for w, bias in zip(model.weights, model.biases):
        nxt = []
        for j in range(w.shape[0]):
            acc = None
            for k in range(w.shape[1]):
                term = b.mul(b.const(float(w[j, k])), acts[k])
                acc = term if acc is None else b.add(acc, term)
            acc = b.add(acc, b.const(float(bias[j])))
            nxt.append(b.activation("relu", acc))
        acts = nxt
    out = b.add(b.const(model.out_lo), b.mul(acts[0], b.const(model.out_span)))
    return b.build(out)


def _unscale_output(b: IrBuilder, reg: int, out_lo: float, out_span: float) -> int:
    return b.add(b.const(out_lo), b.mul(reg, b.const(out_span)))


def _lower_arma(model: ArmaModel, quantity: str, name: str) -> IrProgram:
    b = _builder(name, quantity)
    p, q, d = model.p, model.q, model.dim
    y_slots = [b.new_state_slot() for _ in range(p)]
    x_slots = [[b.new_state_slot() for _ in range(d)] for _ in range(q - 1)]
    u = _scaled_inputs(b, model.in_scaler)
    y_hist = [b.load_state(s) for s in y_slots]
    x_hist = [[b.load_state(s) for s in row] for row in x_slots]
    a_coef, b_coef = model.a, model.b
    acc = None

    def accumulate(acc, term):
        return term if acc is None else b.add(acc, term)

    for i in range(p):
        acc = accumulate(acc, b.mul(b.const(float(a_coef[i])), y_hist[i]))
    for k in range(d):
        acc = accumulate(acc, b.mul(b.const(float(b_coef[0, k])), u[k]))
    for j in range(1, q):
        for k in range(d):
            acc = accumulate(acc, b.mul(b.const(float(b_coef[j, k])), x_hist[j - 1][k]))
    y = b.add(acc, b.const(model.bias)) if acc is not None else b.const(model.bias)
    # shift ring buffers; all loads happened above, so stores cannot alias
    for i in range(p - 1, 0, -1):
        b.store_state(y_slots[i], y_hist[i - 1])
    if p:
        b.store_state(y_slots[0], y)
    for j in range(q - 2, 0, -1):
        for k in range(d):
            b.store_state(x_slots[j][k], x_hist[j - 1][k])
    if q > 1:
        for k in range(d):
            b.store_state(x_slots[0][k], u[k])
    return b.build(_unscale_output(b, y, model.out_lo, model.out_span))


def _lower_cell(model: RecurrentCell, quantity: str, name: str) -> IrProgram:
    b = _builder(name, quantity)
    h_slot = b.new_state_slot()
    u = _scaled_inputs(b, model.in_scaler)
    h = b.load_state(h_slot)
    phi = _PHI_ACT[model.phi]
    sig = _SIG_ACT[model.sig]

    def affine(gate, h_term):
        w_x, w_h, bias = gate
        acc = b.mul(b.const(float(w_x[0])), u[0])
        for k in range(1, len(u)):
            acc = b.add(acc, b.mul(b.const(float(w_x[k])), u[k]))
        acc = b.add(acc, b.mul(b.const(float(w_h)), h_term))
        return b.add(acc, b.const(float(bias)))

    gates = model.gates()
    if model.variant == "simple_rnn":
        h_new = b.activation(phi, affine(gates[0], h))
    elif model.variant == "gru":
        z = b.activation(sig, affine(gates[0], h))
        r = b.activation(sig, affine(gates[1], h))
        hc = b.activation(phi, affine(gates[2], b.mul(r, h)))
        # delta form of (1-z)h + z*hc: carries h exactly, which matters for
        # float32 state chains with a nearly closed update gate
        h_new = b.add(h, b.mul(z, b.sub(hc, h)))
    elif model.variant == "half_gru":
        r = b.activation(sig, affine(gates[0], h))
        h_new = b.activation(phi, affine(gates[1], b.mul(r, h)))
    else:
        raise UnsupportedConstructError(f"unknown cell variant {model.variant!r}")
    b.store_state(h_slot, h_new)
    return b.build(_unscale_output(b, h_new, model.out_lo, model.out_span))


# ---------------------------------------------------------------------------
# Reference routines
# ---------------------------------------------------------------------------


def _tfine_chain(b: IrBuilder, calib: CalibrationConstants, adc_t: int) -> int:
    """Faithful step-by-step transcription of the temperature compensation."""
    var1 = b.mul(
        b.sub(b.div(adc_t, b.const(16384.0)),
              b.div(b.const(calib.par_t1), b.const(1024.0))),
        b.const(calib.par_t2))
    dd = b.sub(b.div(adc_t, b.const(131072.0)),
               b.div(b.const(calib.par_t1), b.const(8192.0)))
    var2 = b.mul(b.mul(b.mul(dd, dd), b.const(calib.par_t3)), b.const(16.0))
    return b.add(var1, var2)


def lower_reference(quantity: str, calib: CalibrationConstants,
                    name: str | None = None) -> IrProgram:
    b = _builder(name or f"{quantity}_original", quantity)
    adc_t = b.load_input(0)
    t_fine = _tfine_chain(b, calib, adc_t)
    if quantity == "temperature":
        return b.build(b.div(t_fine, b.const(5120.0)))

    if quantity == "pressure":
        adc_p = b.load_input(1)
        var1 = b.sub(b.div(t_fine, b.const(2.0)), b.const(64000.0))
        var2 = b.div(b.mul(b.mul(var1, var1), b.const(calib.par_p6)), b.const(131072.0))
        var2 = b.add(var2, b.mul(b.mul(var1, b.const(calib.par_p5)), b.const(2.0)))
        var2 = b.add(b.div(var2, b.const(4.0)),
                     b.mul(b.const(calib.par_p4), b.const(65536.0)))
        var1b = b.div(
            b.add(b.div(b.mul(b.mul(b.const(calib.par_p3), var1), var1), b.const(16384.0)),
                  b.mul(b.const(calib.par_p2), var1)),
            b.const(524288.0))
        var1c = b.mul(b.add(b.const(1.0), b.div(var1b, b.const(32768.0))),
                      b.const(calib.par_p1))
        press = b.sub(b.const(1048576.0), adc_p)
        press = b.div(b.mul(b.sub(press, b.div(var2, b.const(4096.0))),
                            b.const(6250.0)), var1c)
        v1 = b.div(b.mul(b.mul(b.const(calib.par_p9), press), press),
                   b.const(2147483648.0))
        v2 = b.div(b.mul(press, b.const(calib.par_p8)), b.const(32768.0))
        pc = b.div(press, b.const(256.0))
        v3 = b.div(b.mul(b.mul(b.mul(pc, pc), pc), b.const(calib.par_p10)),
                   b.const(131072.0))
        corr = b.add(b.add(b.add(v1, v2), v3),
                     b.mul(b.const(calib.par_p7), b.const(128.0)))
        return b.build(b.add(press, b.div(corr, b.const(16.0))))

    if quantity == "humidity":
        adc_h = b.load_input(1)
        temp = b.div(t_fine, b.const(5120.0))
        var1 = b.sub(adc_h,
                     b.add(b.mul(b.const(calib.par_h1), b.const(16.0)),
                           b.mul(b.div(b.const(calib.par_h3), b.const(2.0)), temp)))
        inner = b.add(
            b.add(b.const(1.0),
                  b.mul(b.div(b.const(calib.par_h4), b.const(16384.0)), temp)),
            b.mul(b.mul(b.div(b.const(calib.par_h5), b.const(1048576.0)), temp), temp))
        var2 = b.mul(var1, b.mul(b.div(b.const(calib.par_h2), b.const(262144.0)), inner))
        var3 = b.div(b.const(calib.par_h6), b.const(16384.0))
        var4 = b.div(b.const(calib.par_h7), b.const(2097152.0))
        hum = b.add(var2, b.mul(b.mul(b.add(var3, b.mul(var4, temp)), var2), var2))
        return b.build(b.minimum(b.maximum(hum, b.const(0.0)), b.const(100.0)))

    raise UnsupportedConstructError(f"unknown quantity {quantity!r}")
