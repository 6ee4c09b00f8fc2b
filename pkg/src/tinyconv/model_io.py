"""JSON model files: family tag, quantity, parameters, scalers, fit metadata."""

from __future__ import annotations

import json
from pathlib import Path

from .sequence_models import ArmaModel, RecurrentCell
from .surrogates import GpModel, LinearModel, LutModel, MlpModel, QuadraticModel

_TYPES = {
    "linear": LinearModel,
    "quadratic": QuadraticModel,
    "lut": LutModel,
    "gp": GpModel,
    "mlp": MlpModel,
    "arma": ArmaModel,
    "cell": RecurrentCell,
}


def model_type(model) -> str:
    for tag, cls in _TYPES.items():
        if type(model) is cls:
            return tag
    raise TypeError(f"unknown model class {type(model).__name__}")


def save_model(model, path, family: str, quantity: str) -> None:
    doc = {
        "family": family,
        "quantity": quantity,
        "model_type": model_type(model),
        "params": model.to_dict(),
        "fit": getattr(model, "fit_info", {}),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_model(path):
    """Returns (model, meta) where meta has family/quantity/fit keys."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    cls = _TYPES[doc["model_type"]]
    model = cls.from_dict(doc["params"])
    model.fit_info = doc.get("fit", {})
    meta = {k: doc[k] for k in ("family", "quantity", "fit") if k in doc}
    return model, meta
