"""Registry of trainable model families and their training-data recipes.

Family names follow the evaluation key: LUT and GP sizes count total stored
points (so ``lut-400`` is a 20x20 grid for two-input quantities), network
names list layer widths, ARMA names give AR/MA orders, and cell names carry
their activation pair.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

from . import datagen, sequence_models, surrogates
from .datagen import Dataset, MeshSpec, SequenceSpec
from .errors import UnknownFamilyError
from .oracle import QUANTITIES, CalibrationConstants

MESH_LEVELS = 20            # default training mesh, inverse refined
SEQ_TRAIN_LENGTH = 5000
MLP_MAX_EPOCHS = 10_000
SEQ_MAX_EPOCHS = 20_000

_SEQUENCE_FAMILIES = (
    "ar1ma1", "ar2ma1", "ar3ma1", "ar3ma2",
    "gru-tanh-sigmoid", "gru-relu-sigmoid", "gru-relu-softsign",
    "half-gru-relu-softsign",
    "rnn-tanh", "rnn-relu",
)

_FUNCTION_FAMILIES_1D = (
    "linear", "quadratic", "lut-20", "lut-10", "lut-3", "gp-3", "gp-2",
    "nn-3-3-1", "nn-3-1", "nn-1-1", "nn-1",
)

_FUNCTION_FAMILIES_2D = (
    "linear", "quadratic", "lut-400", "lut-100", "lut-9", "gp-9", "gp-4",
    "nn-3-3-1", "nn-3-1", "nn-1-1", "nn-1",
)


def default_roster(quantity: str, include_sequence: bool | None = None) -> list[str]:
    """The full evaluation key for the quantity.  Sequence families are on
    by default only for temperature; the two-input conversions are known to
    be dominated by quadratic regression and are skipped unless asked for.
    """
    d = len(datagen.INPUT_COLUMNS[quantity])
    fams = ["original"] + list(_FUNCTION_FAMILIES_1D if d == 1 else _FUNCTION_FAMILIES_2D)
    if include_sequence is None:
        include_sequence = quantity == "temperature"
    if include_sequence:
        fams += list(_SEQUENCE_FAMILIES)
    return fams


# Seed bookkeeping (documented, stable):
#   training-sequence data: master + 500 + 10 * quantity_index
#   model training seeds:   master + 1000 + k            (k = seed index)
#   test datasets:          master + 2000 + 10 * j + quantity_index


def train_data_seed(master_seed: int, quantity: str) -> int:
    return master_seed + 500 + 10 * QUANTITIES.index(quantity)


def model_seed(master_seed: int, k: int) -> int:
    return master_seed + 1000 + k


def test_data_seed(master_seed: int, j: int, quantity: str) -> int:
    return master_seed + 2000 + 10 * j + QUANTITIES.index(quantity)


@dataclass(frozen=True)
class FamilySpec:
    name: str
    kind: str      # "reference" | "function" | "sequence"
    seeded: bool


@lru_cache(maxsize=64)
def _mesh(quantity: str, levels: int, refined: bool,
          calib: CalibrationConstants) -> Dataset:
    return datagen.generate_mesh(quantity, MeshSpec(levels, refined), calib)


@lru_cache(maxsize=64)
def _sequence(quantity: str, length: int, seed: int,
              calib: CalibrationConstants) -> Dataset:
    return datagen.generate_sequence_dataset(quantity, SequenceSpec(length, seed=seed), calib)


def _grid_levels(total: int, dim: int, name: str) -> int:
    if dim == 1:
        return total
    levels = math.isqrt(total)
    if levels * levels != total:
        raise UnknownFamilyError(f"{name}: {total} is not a square point count")
    return levels


def parse_family(name: str, quantity: str) -> FamilySpec:
    d = len(datagen.INPUT_COLUMNS[quantity])
    if name == "original":
        return FamilySpec(name, "reference", False)
    if name in ("linear", "quadratic") or re.fullmatch(r"(lut|gp)-\d+", name):
        return FamilySpec(name, "function", False)
    if re.fullmatch(r"nn(-\d+)+", name):
        return FamilySpec(name, "function", True)
    if re.fullmatch(r"ar\d+ma\d+", name):
        return FamilySpec(name, "sequence", True)
    if re.fullmatch(r"(gru|half-gru)-(tanh|relu)-(sigmoid|softsign)", name):
        return FamilySpec(name, "sequence", True)
    if re.fullmatch(r"rnn-(tanh|relu)", name):
        return FamilySpec(name, "sequence", True)
    raise UnknownFamilyError(name)


def training_dataset(name: str, quantity: str, calib: CalibrationConstants,
                     master_seed: int) -> Dataset | None:
    spec = parse_family(name, quantity)
    d = len(datagen.INPUT_COLUMNS[quantity])
    if spec.kind == "reference":
        return None
    if spec.kind == "sequence":
        return _sequence(quantity, SEQ_TRAIN_LENGTH,
                         train_data_seed(master_seed, quantity), calib)
    if name.startswith("lut-"):
        levels = _grid_levels(int(name.split("-")[1]), d, name)
        return _mesh(quantity, levels, False, calib)
    if name.startswith("gp-"):
        levels = _grid_levels(int(name.split("-")[1]), d, name)
        return _mesh(quantity, levels, True, calib)
    return _mesh(quantity, MESH_LEVELS, True, calib)


def train_family(name: str, quantity: str, calib: CalibrationConstants,
                 master_seed: int, seed_index: int = 0):
    """Train one instance of a family; returns the model (None for original)."""
    spec = parse_family(name, quantity)
    if spec.kind == "reference":
        return None
    data = training_dataset(name, quantity, calib, master_seed)
    model = _fit(name, quantity, data, model_seed(master_seed, seed_index))
    model.fit_info.setdefault("dataset_seed", data.meta.get("seed"))
    model.fit_info.setdefault("dataset_spec", data.meta.get("spec"))
    return model


def _fit(name: str, quantity: str, data: Dataset, seed: int):
    if name == "linear":
        return surrogates.fit_linear(data)
    if name == "quadratic":
        return surrogates.fit_quadratic(data)
    if name.startswith("lut-"):
        return surrogates.build_lut(data)
    if name.startswith("gp-"):
        return surrogates.fit_gp(data)
    if name.startswith("nn-"):
        layers = tuple(int(v) for v in name.split("-")[1:])
        return surrogates.train_mlp(data, layers, seed, max_epochs=MLP_MAX_EPOCHS)
    m = re.fullmatch(r"ar(\d+)ma(\d+)", name)
    if m:
        return sequence_models.train_arma(data, int(m.group(1)), int(m.group(2)),
                                          seed, max_epochs=SEQ_MAX_EPOCHS)
    parts = name.split("-")
    if parts[0] == "half":
        variant, phi, sig = "half_gru", parts[2], parts[3]
    elif parts[0] == "gru":
        variant, phi, sig = "gru", parts[1], parts[2]
    else:
        variant, phi, sig = "simple_rnn", parts[1], "sigmoid"
    return sequence_models.train_cell(data, variant, phi, sig, seed,
                                      max_epochs=SEQ_MAX_EPOCHS)
