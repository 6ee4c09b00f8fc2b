"""A tiny straight-line arithmetic IR.

Every model family and the reference routines lower to this substrate; one
interpreter provides predictions, one coster counts weighted instructions
(static = dynamic for straight-line code), and one estimator derives flash
and RAM footprints.  The IR is branchless: clamps are min/max, choices are
select, and table indices are proven in bounds by a tiny interval analysis
at build time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedConstructError

ARITH_OPS = ("add", "sub", "mul", "div", "min", "max", "compare_lt", "select")
OPCODES = (
    "load_input", "load_const", "load_state", "store_state",
    *ARITH_OPS, "floor_to_index", "table_read", "activation",
)
ACTIVATION_KINDS = ("relu", "sigmoid", "tanh", "softsign", "exp", "gaussian", "hard_sigmoid")


@dataclass(frozen=True)
class Instr:
    op: str
    dst: int = -1                 # destination register, -1 for store_state
    srcs: tuple = ()              # source registers
    const: float | None = None    # load_const payload
    slot: int | None = None       # input index / state slot / table id
    kind: str | None = None       # activation kind
    bound: int | None = None      # floor_to_index inclusive upper index


@dataclass(frozen=True)
class Table:
    values: tuple
    ram_resident: bool


@dataclass(frozen=True)
class IrProgram:
    name: str
    n_inputs: int
    instrs: tuple
    tables: tuple
    n_state: int
    output_reg: int
    input_ranges: tuple = ()   # ((lo, hi), ...) raw-domain metadata
    output_range: tuple = ()   # (lo, hi) converted-domain metadata

    def opcode_multiset(self) -> dict:
        out: dict = {}
        for ins in self.instrs:
            out[ins.op] = out.get(ins.op, 0) + 1
        return out


class IrBuilder:
    """Constructs valid programs; registers are single-assignment by
    construction and constants are pooled per distinct value.
    """

    def __init__(self, name: str, n_inputs: int,
                 input_ranges=(), output_range=()):
        self.name = name
        self.n_inputs = n_inputs
        self.input_ranges = tuple(tuple(r) for r in input_ranges)
        self.output_range = tuple(output_range)
        self._instrs: list[Instr] = []
        self._next_reg = 0
        self._tables: list[Table] = []
        self._n_state = 0
        self._const_pool: dict[float, int] = {}
        self._input_pool: dict[int, int] = {}
        # conservative integer interval for index-like registers
        self._index_range: dict[int, tuple[int, int]] = {}

    def _emit(self, op: str, srcs=(), **kw) -> int:
        for s in srcs:
            if not 0 <= s < self._next_reg:
                raise UnsupportedConstructError(f"use of undefined register r{s}")
        dst = self._next_reg
        self._next_reg += 1
        self._instrs.append(Instr(op, dst, tuple(srcs), **kw))
        return dst

    def load_input(self, index: int) -> int:
        if not 0 <= index < self.n_inputs:
            raise UnsupportedConstructError(f"input index {index} out of range")
        if index not in self._input_pool:
            self._input_pool[index] = self._emit("load_input", slot=index)
        return self._input_pool[index]

    def const(self, value: float) -> int:
        value = float(value)
        if value not in self._const_pool:
            reg = self._emit("load_const", const=value)
            self._const_pool[value] = reg
            if value == int(value):
                self._index_range[reg] = (int(value), int(value))
        return self._const_pool[value]

    def new_state_slot(self) -> int:
        self._n_state += 1
        return self._n_state - 1

    def load_state(self, slot: int) -> int:
        if not 0 <= slot < self._n_state:
            raise UnsupportedConstructError(f"state slot {slot} not declared")
        return self._emit("load_state", slot=slot)

    def store_state(self, slot: int, reg: int) -> None:
        if not 0 <= slot < self._n_state:
            raise UnsupportedConstructError(f"state slot {slot} not declared")
        if not 0 <= reg < self._next_reg:
            raise UnsupportedConstructError(f"use of undefined register r{reg}")
        self._instrs.append(Instr("store_state", -1, (reg,), slot=slot))

    def _binop(self, op: str, a: int, b: int) -> int:
        dst = self._emit(op, (a, b))
        if op in ("add", "mul") and a in self._index_range and b in self._index_range:
            (alo, ahi), (blo, bhi) = self._index_range[a], self._index_range[b]
            if op == "add":
                self._index_range[dst] = (alo + blo, ahi + bhi)
            elif alo >= 0 and blo >= 0:
                self._index_range[dst] = (alo * blo, ahi * bhi)
        return dst

    def add(self, a, b):
        return self._binop("add", a, b)

    def sub(self, a, b):
        return self._binop("sub", a, b)

    def mul(self, a, b):
        return self._binop("mul", a, b)

    def div(self, a, b):
        return self._binop("div", a, b)

    def minimum(self, a, b):
        return self._binop("min", a, b)

    def maximum(self, a, b):
        return self._binop("max", a, b)

    def compare_lt(self, a, b):
        return self._binop("compare_lt", a, b)

    def select(self, cond, a, b) -> int:
        return self._emit("select", (cond, a, b))

    def floor_to_index(self, reg: int, bound: int) -> int:
        if bound < 0:
            raise UnsupportedConstructError("floor_to_index bound must be >= 0")
        dst = self._emit("floor_to_index", (reg,), bound=bound)
        self._index_range[dst] = (0, bound)
        return dst

    def add_table(self, values, ram_resident: bool) -> int:
        self._tables.append(Table(tuple(float(v) for v in values), ram_resident))
        return len(self._tables) - 1

    def table_read(self, table_id: int, index_reg: int) -> int:
        if not 0 <= table_id < len(self._tables):
            raise UnsupportedConstructError(f"table t{table_id} not declared")
        rng = self._index_range.get(index_reg)
        size = len(self._tables[table_id].values)
        if rng is None or rng[0] < 0 or rng[1] >= size:
            raise UnsupportedConstructError(
                f"index register r{index_reg} not provably within t{table_id}[0..{size - 1}]")
        return self._emit("table_read", (index_reg,), slot=table_id)

    def activation(self, kind: str, reg: int) -> int:
        if kind not in ACTIVATION_KINDS:
            raise UnsupportedConstructError(f"unknown activation {kind!r}")
        return self._emit("activation", (reg,), kind=kind)

    def build(self, output_reg: int) -> IrProgram:
        if not 0 <= output_reg < self._next_reg:
            raise UnsupportedConstructError("output register undefined")
        return IrProgram(
            name=self.name,
            n_inputs=self.n_inputs,
            instrs=tuple(self._instrs),
            tables=tuple(self._tables),
            n_state=self._n_state,
            output_reg=output_reg,
            input_ranges=self.input_ranges,
            output_range=self.output_range,
        )


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------


def _activate(kind: str, x):
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        e = np.exp(-np.abs(x))  # overflow-free either side
        return np.where(np.asarray(x) < 0.0, e / (1.0 + e), 1.0 / (1.0 + e))
    if kind == "tanh":
        return np.tanh(x)
    if kind == "softsign":
        return x / (1.0 + np.abs(x))
    if kind == "exp":
        return np.exp(x)
    if kind == "gaussian":
        return np.exp(-(x * x))
    # hard_sigmoid: clamp(0.2 x + 0.5, 0, 1)
    return np.minimum(np.maximum(0.2 * x + 0.5, 0.0), 1.0)


def _eval(prog: IrProgram, regs, inputs, state):
    """Shared evaluation core; `inputs` rows may be scalars or numpy arrays."""
    for ins in prog.instrs:
        op = ins.op
        if op == "load_input":
            regs[ins.dst] = inputs[ins.slot]
        elif op == "load_const":
            regs[ins.dst] = ins.const
        elif op == "load_state":
            regs[ins.dst] = state[ins.slot]
        elif op == "store_state":
            state[ins.slot] = regs[ins.srcs[0]]
        elif op == "add":
            regs[ins.dst] = regs[ins.srcs[0]] + regs[ins.srcs[1]]
        elif op == "sub":
            regs[ins.dst] = regs[ins.srcs[0]] - regs[ins.srcs[1]]
        elif op == "mul":
            regs[ins.dst] = regs[ins.srcs[0]] * regs[ins.srcs[1]]
        elif op == "div":
            regs[ins.dst] = regs[ins.srcs[0]] / regs[ins.srcs[1]]
        elif op == "min":
            regs[ins.dst] = np.minimum(regs[ins.srcs[0]], regs[ins.srcs[1]])
        elif op == "max":
            regs[ins.dst] = np.maximum(regs[ins.srcs[0]], regs[ins.srcs[1]])
        elif op == "compare_lt":
            regs[ins.dst] = np.where(regs[ins.srcs[0]] < regs[ins.srcs[1]], 1.0, 0.0)
        elif op == "select":
            c, a, b = (regs[s] for s in ins.srcs)
            regs[ins.dst] = np.where(c != 0.0, a, b)
        elif op == "floor_to_index":
            regs[ins.dst] = np.minimum(np.maximum(np.floor(regs[ins.srcs[0]]), 0.0),
                                       float(ins.bound))
        elif op == "table_read":
            tbl = np.asarray(prog.tables[ins.slot].values)
            idx = regs[ins.srcs[0]]
            if np.ndim(idx) == 0:
                regs[ins.dst] = tbl[int(idx)]
            else:
                regs[ins.dst] = tbl[idx.astype(int)]
        elif op == "activation":
            regs[ins.dst] = _activate(ins.kind, regs[ins.srcs[0]])
        else:
            raise UnsupportedConstructError(f"unknown opcode {op!r}")
    return regs[prog.output_reg]


def interpret(prog: IrProgram, inputs, state=None):
    """Evaluate one conversion; returns (value, new_state).  Pure: the passed
    state is copied, never mutated."""
    inputs = np.atleast_1d(np.asarray(inputs, dtype=float))
    if len(inputs) != prog.n_inputs:
        raise ValueError(f"expected {prog.n_inputs} inputs, got {len(inputs)}")
    state = (np.zeros(prog.n_state) if state is None
             else np.array(state, dtype=float))
    regs = [0.0] * (len(prog.instrs) + 1)
    value = _eval(prog, regs, [float(v) for v in inputs], state)
    return float(value), state


def interpret_batch(prog: IrProgram, x: np.ndarray) -> np.ndarray:
    """Vectorized evaluation of a stateless program over rows of x."""
    if prog.n_state:
        raise ValueError("interpret_batch only handles stateless programs")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    regs = [None] * (len(prog.instrs) + 1)
    cols = [x[:, k] for k in range(x.shape[1])]
    out = _eval(prog, regs, cols, np.zeros(0))
    return np.broadcast_to(out, (len(x),)).astype(float)


def interpret_sequence(prog: IrProgram, x: np.ndarray) -> np.ndarray:
    """Evaluate row by row from zero state, threading the state through."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    state = np.zeros(prog.n_state)
    out = np.empty(len(x))
    for t in range(len(x)):
        out[t], state = interpret(prog, x[t], state)
    return out


def dump(prog: IrProgram) -> str:
    """Line-oriented text form, stable for golden tests."""
    lines = [
        f"; name: {prog.name}",
        f"; inputs: {prog.n_inputs}",
        f"; state_slots: {prog.n_state}",
    ]
    for i, t in enumerate(prog.tables):
        kind = "ram" if t.ram_resident else "flash"
        lines.append(f"; table t{i}: {len(t.values)} entries, {kind}")
    for ins in prog.instrs:
        if ins.op == "load_input":
            lines.append(f"r{ins.dst} = load_input {ins.slot}")
        elif ins.op == "load_const":
            lines.append(f"r{ins.dst} = load_const {ins.const!r}")
        elif ins.op == "load_state":
            lines.append(f"r{ins.dst} = load_state s{ins.slot}")
        elif ins.op == "store_state":
            lines.append(f"store_state s{ins.slot}, r{ins.srcs[0]}")
        elif ins.op == "floor_to_index":
            lines.append(f"r{ins.dst} = floor_to_index r{ins.srcs[0]}, {ins.bound}")
        elif ins.op == "table_read":
            lines.append(f"r{ins.dst} = table_read t{ins.slot}, r{ins.srcs[0]}")
        elif ins.op == "activation":
            lines.append(f"r{ins.dst} = activation {ins.kind}, r{ins.srcs[0]}")
        else:
            args = ", ".join(f"r{s}" for s in ins.srcs)
            lines.append(f"r{ins.dst} = {ins.op} {args}")
    lines.append(f"output r{prog.output_reg}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Cost model
# ---------------------------------------------------------------------------

_DEFAULT_OPCODE_WEIGHTS = {
    "load_input": 2.0,
    "load_const": 2.0,
    "load_state": 2.0,
    "store_state": 2.0,
    "table_read": 2.0,
    "add": 1.0,
    "sub": 1.0,
    "mul": 1.0,
    "div": 1.0,
    "min": 1.0,
    "max": 1.0,
    "compare_lt": 1.0,
    "select": 1.0,
    "floor_to_index": 3.0,
}

# Measured per-activation dynamic-instruction costs on the target ISA.
_DEFAULT_ACTIVATION_WEIGHTS = {
    "exp": 109.0,
    "gaussian": 131.0,
    "sigmoid": 122.0,
    "relu": 19.0,
    "hard_sigmoid": 33.0,
    "tanh": 124.0,
    "softsign": 11.0,
}


@dataclass(frozen=True)
class CostTable:
    opcode_weights: dict = field(default_factory=lambda: dict(_DEFAULT_OPCODE_WEIGHTS))
    activation_weights: dict = field(default_factory=lambda: dict(_DEFAULT_ACTIVATION_WEIGHTS))

    def __post_init__(self):
        missing = [op for op in OPCODES if op != "activation"
                   and op not in self.opcode_weights]
        missing += [k for k in ACTIVATION_KINDS if k not in self.activation_weights]
        if missing:
            raise ValueError(f"cost table misses weights for {missing}")
        bad = [k for k, v in {**self.opcode_weights, **self.activation_weights}.items()
               if not (isinstance(v, (int, float)) and v >= 0.0 and math.isfinite(v))]
        if bad:
            raise ValueError(f"cost weights must be finite and >= 0: {bad}")

    def weight(self, ins: Instr) -> float:
        if ins.op == "activation":
            return float(self.activation_weights[ins.kind])
        return float(self.opcode_weights[ins.op])

    @classmethod
    def from_json(cls, path) -> "CostTable":
        with open(path, "r", encoding="utf-8") as fh:
            flat = json.load(fh)
        ops = {k: float(v) for k, v in flat.items() if k in _DEFAULT_OPCODE_WEIGHTS}
        acts = {k: float(v) for k, v in flat.items() if k in ACTIVATION_KINDS}
        unknown = [k for k in flat if k not in _DEFAULT_OPCODE_WEIGHTS
                   and k not in ACTIVATION_KINDS]
        if unknown:
            raise ValueError(f"unknown cost-table keys {unknown}")
        return cls({**_DEFAULT_OPCODE_WEIGHTS, **ops},
                   {**_DEFAULT_ACTIVATION_WEIGHTS, **acts})

    def to_flat_dict(self) -> dict:
        return {**self.opcode_weights, **self.activation_weights}


DEFAULT_COST_TABLE = CostTable()


def cost(prog: IrProgram, table: CostTable = DEFAULT_COST_TABLE) -> float:
    """Weighted per-conversion instruction count (straight-line, so the
    static count equals the dynamic count and is input independent)."""
    return float(sum(table.weight(ins) for ins in prog.instrs))


# ---------------------------------------------------------------------------
# Memory estimate
# ---------------------------------------------------------------------------

_BYTES_PER_INSTR = 4
_BYTES_PER_VALUE = 4  # emitted kernels are single precision


@dataclass(frozen=True)
class MemoryEstimate:
    flash_bytes: int
    ram_bytes: int


def peak_live_registers(prog: IrProgram) -> int:
    n = len(prog.instrs)
    last_use: dict[int, int] = {}
    def_idx: dict[int, int] = {}
    for i, ins in enumerate(prog.instrs):
        if ins.dst >= 0:
            def_idx[ins.dst] = i
            last_use[ins.dst] = i
        for s in ins.srcs:
            last_use[s] = i
    if prog.output_reg in last_use:
        last_use[prog.output_reg] = n
    peak = 0
    live = 0
    events = [0] * (n + 2)
    for reg, d in def_idx.items():
        events[d] += 1
        events[last_use[reg] + 1] -= 1
    for t in range(n + 1):
        live += events[t]
        peak = max(peak, live)
    return peak


def estimate_memory(prog: IrProgram) -> MemoryEstimate:
    """flash = code bytes + flash-resident constants; RAM = RAM tables +
    state slots + peak live locals, all at 4 bytes per value."""
    flash_consts = sum(len(t.values) for t in prog.tables if not t.ram_resident)
    ram_consts = sum(len(t.values) for t in prog.tables if t.ram_resident)
    flash = _BYTES_PER_INSTR * len(prog.instrs) + _BYTES_PER_VALUE * flash_consts
    ram = _BYTES_PER_VALUE * (ram_consts + prog.n_state + peak_live_registers(prog))
    return MemoryEstimate(flash_bytes=int(flash), ram_bytes=int(ram))
