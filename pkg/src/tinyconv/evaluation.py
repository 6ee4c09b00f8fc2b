"""Accuracy/overhead evaluation: normalized RMS error, the
ten-dataset/five-seed protocol, and Pareto-frontier extraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import datagen, families, ir, lowering, sequence_models, surrogates
from .datagen import Dataset, SequenceSpec
from .errors import DivergenceError, EmptyRosterError, LengthMismatchError
from .ir import DEFAULT_COST_TABLE, CostTable
from .oracle import RANGES, CalibrationConstants, OperatingRange
from .sequence_models import ArmaModel, RecurrentCell


@dataclass(frozen=True)
class EvalConfig:
    sequence_length: int = 1000
    dataset_count: int = 10
    seeds: int = 5
    master_seed: int = 0
    cost_table: CostTable = DEFAULT_COST_TABLE

    def __post_init__(self):
        if min(self.sequence_length, self.dataset_count, self.seeds) < 1:
            raise ValueError("all evaluation counts must be >= 1")


@dataclass
class EvalRecord:
    model: str
    quantity: str
    norm_rmse: float
    norm_rmse_spread: float
    rmse_units: float
    cost: float
    flash_bytes: int
    ram_bytes: int
    pareto: bool = False
    breakdown: list = field(default_factory=list)  # per (seed, dataset) errors
    seeds_failed: int = 0  # training instances lost to divergence


def normalized_rmse(pred, truth, rng: OperatingRange) -> float:
    """Root mean square of per-point errors expressed as percent of range."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 1 or len(pred) < 1:
        raise LengthMismatchError(f"pred {pred.shape} vs truth {truth.shape}")
    scaled = (pred - truth) * (100.0 / rng.span)
    return float(np.sqrt(np.mean(scaled * scaled)))


@lru_cache(maxsize=16)
def _test_datasets(quantity: str, length: int, count: int, master_seed: int,
                   calib: CalibrationConstants) -> tuple:
    return tuple(
        datagen.generate_sequence_dataset(
            quantity,
            SequenceSpec(length, seed=families.test_data_seed(master_seed, j, quantity)),
            calib)
        for j in range(count)
    )


def test_datasets(quantity: str, cfg: EvalConfig, calib: CalibrationConstants):
    """The shared test sequences: every model of a quantity sees these."""
    return _test_datasets(quantity, cfg.sequence_length, cfg.dataset_count,
                          cfg.master_seed, calib)


def predict_with(model, quantity: str, inputs: np.ndarray,
                 calib: CalibrationConstants) -> np.ndarray:
    if model is None:  # the original conversion
        return datagen.apply_oracle(quantity, inputs, calib)
    if isinstance(model, (ArmaModel, RecurrentCell)):
        return sequence_models.predict_sequence(model, inputs)
    return surrogates.predict(model, inputs)


def _resources(family: str, quantity: str, model,
               calib: CalibrationConstants, cfg: EvalConfig):
    if model is None:
        prog = lowering.lower_reference(quantity, calib)
    else:
        prog = lowering.lower(model, quantity, name=f"{quantity}_{family}")
    mem = ir.estimate_memory(prog)
    return ir.cost(prog, cfg.cost_table), mem.flash_bytes, mem.ram_bytes


def evaluate_models(family: str, quantity: str, models: list,
                    cfg: EvalConfig, calib: CalibrationConstants) -> EvalRecord:
    """Score trained instances of one family on the shared test datasets."""
    rng = RANGES[quantity]
    errors = []
    for model in models:
        for ds in test_datasets(quantity, cfg, calib):
            pred = predict_with(model, quantity, ds.inputs, calib)
            errors.append(normalized_rmse(pred, ds.targets, rng))
    errors_arr = np.array(errors)
    mean = float(errors_arr.mean())
    spread = float(errors_arr.std(ddof=1)) if len(errors_arr) > 1 else 0.0
    cost_v, flash, ram = _resources(family, quantity, models[0], calib, cfg)
    return EvalRecord(
        model=family, quantity=quantity,
        norm_rmse=mean, norm_rmse_spread=spread,
        rmse_units=mean * rng.span / 100.0,
        cost=cost_v, flash_bytes=flash, ram_bytes=ram,
        breakdown=[float(e) for e in errors_arr],
    )


def evaluate_model(target, quantity: str, cfg: EvalConfig,
                   calib: CalibrationConstants, name: str | None = None) -> EvalRecord:
    """Evaluate either one trained model instance or, given a family name,
    the family trained per the protocol (seed-averaged when stochastic).

    Instances whose training diverges are skipped; the family is scored over
    the survivors and only an all-seed divergence fails it.
    """
    if not isinstance(target, str):
        return evaluate_models(name or type(target).__name__.lower(), quantity,
                               [target], cfg, calib)
    spec = families.parse_family(target, quantity)
    n_seeds = cfg.seeds if spec.seeded else 1
    models = []
    failed = 0
    last_exc = None
    for k in range(n_seeds):
        try:
            models.append(families.train_family(target, quantity, calib,
                                                cfg.master_seed, k))
        except DivergenceError as exc:
            failed += 1
            last_exc = exc
    if not models:
        raise last_exc
    record = evaluate_models(target, quantity, models, cfg, calib)
    record.seeds_failed = failed
    return record


# ---------------------------------------------------------------------------
# Pareto frontier (minimize error and cost)
# ---------------------------------------------------------------------------


def pareto_flags(points: list[tuple]) -> list[bool]:
    """Non-dominated flags for (error, cost) pairs; exact ties are kept."""
    if not points:
        return []
    order = sorted(range(len(points)), key=lambda i: (points[i][0], points[i][1]))
    flags = [False] * len(points)
    best_cost_before = np.inf  # min cost over strictly smaller errors
    i = 0
    while i < len(order):
        j = i
        err = points[order[i]][0]
        group = []
        while j < len(order) and points[order[j]][0] == err:
            group.append(order[j])
            j += 1
        group_min = min(points[g][1] for g in group)
        for g in group:
            flags[g] = points[g][1] == group_min and points[g][1] < best_cost_before
        best_cost_before = min(best_cost_before, group_min)
        i = j
    return flags


def pareto_frontier(records: list[EvalRecord]) -> list[EvalRecord]:
    """Flag frontier membership in place (per quantity) and return the
    non-dominated records."""
    if not records:
        raise EmptyRosterError("no records to analyze")
    for quantity in sorted({r.quantity for r in records}):
        group = [r for r in records if r.quantity == quantity]
        flags = pareto_flags([(r.norm_rmse, r.cost) for r in group])
        for rec, flag in zip(group, flags):
            rec.pareto = flag
    return [r for r in records if r.pareto]


# ---------------------------------------------------------------------------
# Whole-suite driver
# ---------------------------------------------------------------------------


@dataclass
class SuiteReport:
    records: list
    failures: list  # dicts: model, quantity, error


def run_suite(quantities, cfg: EvalConfig, calib: CalibrationConstants,
              roster: dict | None = None,
              include_sequence: bool | None = None) -> SuiteReport:
    """Train and evaluate every configured family per quantity; per-model
    failures are collected, not raised, and excluded from the frontier."""
    records: list[EvalRecord] = []
    failures: list[dict] = []
    total = 0
    for quantity in quantities:
        names = (roster or {}).get(quantity) if roster else None
        if names is None:
            names = families.default_roster(quantity, include_sequence)
        total += len(names)
        for name in names:
            try:
                records.append(evaluate_model(name, quantity, cfg, calib))
            except Exception as exc:  # noqa: BLE001 - suite must keep going
                failures.append({"model": name, "quantity": quantity,
                                 "error": f"{type(exc).__name__}: {exc}"})
    if total == 0:
        raise EmptyRosterError("empty model roster")
    if records:
        pareto_frontier(records)
    records.sort(key=lambda r: (r.quantity, r.model))
    return SuiteReport(records, failures)


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

_CSV_HEADER = "model,quantity,norm_rmse,rmse_units,cost,flash_bytes,ram_bytes,pareto"


def write_report_csv(records: list[EvalRecord], path) -> None:
    lines = [_CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.model},{r.quantity},{r.norm_rmse!r},{r.rmse_units!r},"
            f"{r.cost!r},{r.flash_bytes},{r.ram_bytes},{int(r.pareto)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_report_csv(path) -> list[EvalRecord]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if lines[0] != _CSV_HEADER:
        raise ValueError(f"unexpected report header {lines[0]!r}")
    out = []
    for line in lines[1:]:
        model, quantity, nr, ru, cost_v, flash, ram, par = line.split(",")
        out.append(EvalRecord(model, quantity, float(nr), 0.0, float(ru),
                              float(cost_v), int(flash), int(ram), bool(int(par))))
    return out


def write_report_json(report: SuiteReport, path) -> None:
    doc = {
        "records": [
            {
                "model": r.model, "quantity": r.quantity,
                "norm_rmse": r.norm_rmse, "norm_rmse_spread": r.norm_rmse_spread,
                "rmse_units": r.rmse_units, "cost": r.cost,
                "flash_bytes": r.flash_bytes, "ram_bytes": r.ram_bytes,
                "pareto": r.pareto, "per_dataset": r.breakdown,
                "seeds_failed": r.seeds_failed,
            }
            for r in report.records
        ],
        "failures": report.failures,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def write_plot_data(records: list[EvalRecord], path) -> None:
    """x=cost, y=normalized RMSE, label; one row per record."""
    lines = ["cost,norm_rmse,label"]
    for r in records:
        lines.append(f"{r.cost!r},{r.norm_rmse!r},{r.quantity}:{r.model}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
