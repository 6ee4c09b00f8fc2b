"""Freestanding single-precision C emission for IR programs, plus golden
test-vector files for conformance checking on the target side.

Emitted kernels depend only on <math.h>.  Constant tables become static
const arrays (flash) or file-scope mutable arrays (RAM, matching the LUT
placement).  Stateful programs take a caller-owned state struct so kernels
stay reentrant and testable.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from numpy.random import default_rng

from . import ir
from .errors import NameCollisionError, UnsupportedConstructError
from .ir import IrProgram

_ACT_EXPR = {
    "relu": "fmaxf({x}, 0.0f)",
    "sigmoid": "1.0f / (1.0f + expf(-{x}))",
    "tanh": "tanhf({x})",
    "softsign": "{x} / (1.0f + fabsf({x}))",
    "exp": "expf({x})",
    "gaussian": "expf(-({x} * {x}))",
    "hard_sigmoid": "fminf(fmaxf(0.2f * {x} + 0.5f, 0.0f), 1.0f)",
}


def _f32(value: float) -> str:
    v = float(np.float32(value))
    if v == int(v) and abs(v) < 1e15:
        return f"{v:.1f}f"
    return f"{v:.9g}f"


def _check_name(name: str) -> None:
    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
        raise UnsupportedConstructError(f"{name!r} is not a C identifier")


def emit_c(prog: IrProgram, name: str) -> tuple[str, str]:
    """Returns (c_source, h_source); output is deterministic per program."""
    _check_name(name)
    stateful = prog.n_state > 0

    h = [f"#ifndef {name.upper()}_H",
         f"#define {name.upper()}_H",
         "",
         f"#define {name}_N_INPUTS {prog.n_inputs}",
         f"#define {name}_N_STATE {prog.n_state}",
         ""]
    if stateful:
        fields = " ".join(f"float s{k};" for k in range(prog.n_state))
        h.append(f"typedef struct {{ {fields} }} {name}_state_t;")
        h.append("")
        h.append(f"float {name}(const float *inputs, {name}_state_t *state);")
    else:
        h.append(f"float {name}(const float *inputs);")
    h += ["", "#endif", ""]

    c = [f'#include "{name}.h"', "#include <math.h>", ""]
    for tid, table in enumerate(prog.tables):
        qual = "static float" if table.ram_resident else "static const float"
        values = ", ".join(_f32(v) for v in table.values)
        c.append(f"{qual} {name}_t{tid}[{len(table.values)}] = {{ {values} }};")
    if prog.tables:
        c.append("")
    if stateful:
        c.append(f"float {name}(const float *inputs, {name}_state_t *state) {{")
    else:
        c.append(f"float {name}(const float *inputs) {{")

    def reg(r: int) -> str:
        return f"r{r}"

    for ins in prog.instrs:
        op = ins.op
        if op == "load_input":
            line = f"const float r{ins.dst} = inputs[{ins.slot}];"
        elif op == "load_const":
            line = f"const float r{ins.dst} = {_f32(ins.const)};"
        elif op == "load_state":
            line = f"const float r{ins.dst} = state->s{ins.slot};"
        elif op == "store_state":
            line = f"state->s{ins.slot} = {reg(ins.srcs[0])};"
        elif op in ("add", "sub", "mul", "div"):
            sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
            a, bb = ins.srcs
            line = f"const float r{ins.dst} = {reg(a)} {sym} {reg(bb)};"
        elif op == "min":
            line = f"const float r{ins.dst} = fminf({reg(ins.srcs[0])}, {reg(ins.srcs[1])});"
        elif op == "max":
            line = f"const float r{ins.dst} = fmaxf({reg(ins.srcs[0])}, {reg(ins.srcs[1])});"
        elif op == "compare_lt":
            a, bb = ins.srcs
            line = f"const float r{ins.dst} = ({reg(a)} < {reg(bb)}) ? 1.0f : 0.0f;"
        elif op == "select":
            cnd, a, bb = ins.srcs
            line = (f"const float r{ins.dst} = ({reg(cnd)} != 0.0f) ? "
                    f"{reg(a)} : {reg(bb)};")
        elif op == "floor_to_index":
            line = (f"const float r{ins.dst} = fminf(fmaxf(floorf({reg(ins.srcs[0])}), "
                    f"0.0f), {float(ins.bound):.1f}f);")
        elif op == "table_read":
            line = f"const float r{ins.dst} = {name}_t{ins.slot}[(int){reg(ins.srcs[0])}];"
        elif op == "activation":
            expr = _ACT_EXPR[ins.kind].format(x=reg(ins.srcs[0]))
            line = f"const float r{ins.dst} = {expr};"
        else:
            raise UnsupportedConstructError(f"cannot emit opcode {op!r}")
        c.append("    " + line)
    c.append(f"    return r{prog.output_reg};")
    c.append("}")
    c.append("")
    return "\n".join(c), "\n".join(h)


def emit_vectors(prog: IrProgram, n: int, seed: int) -> str:
    """CSV of random in-domain inputs with double-precision interpreter
    outputs.  Stateful programs emit one contiguous sequence with per-step
    expectations, threading the state from zero in row order.  A leading
    comment line records the output range for normalized error reporting.
    """
    if n < 1:
        raise ValueError("need at least one vector")
    rng = default_rng(seed)
    cols = [f"in{k}" for k in range(prog.n_inputs)]
    lines = []
    if prog.output_range:
        lo, hi = prog.output_range
        lines.append(f"# range {lo!r} {hi!r}")
    lines.append(",".join(cols + ["expected"]))
    ranges = prog.input_ranges or tuple((0.0, 1.0) for _ in range(prog.n_inputs))
    xs = np.column_stack([rng.uniform(lo, hi, n) for lo, hi in ranges])
    state = np.zeros(prog.n_state)
    for row in xs:
        value, state = ir.interpret(prog, row, state)
        lines.append(",".join(repr(float(v)) for v in row) + f",{value!r}")
    return "\n".join(lines) + "\n"


def write_kernels(named_programs, out_dir, n_vectors: int = 1000,
                  seed: int = 0) -> list[dict]:
    """Emit a batch of kernels plus vectors; duplicate names are an error."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seen: set[str] = set()
    written = []
    for name, prog in named_programs:
        if name in seen:
            raise NameCollisionError(f"duplicate kernel name {name!r}")
        seen.add(name)
        c_text, h_text = emit_c(prog, name)
        c_path = out_dir / f"{name}.c"
        h_path = out_dir / f"{name}.h"
        v_path = out_dir / f"vectors_{name}.csv"
        c_path.write_text(c_text, encoding="utf-8")
        h_path.write_text(h_text, encoding="utf-8")
        v_path.write_text(emit_vectors(prog, n_vectors, seed), encoding="utf-8")
        written.append({"name": name, "c": str(c_path), "h": str(h_path),
                        "vectors": str(v_path)})
    return written
