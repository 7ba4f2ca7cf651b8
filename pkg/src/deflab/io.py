"""JSON file formats for experiments, loss tables and reports.

Matrices are stored as nested lists of ``[re, im]`` pairs. Every document
carries ``"version": 1``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ValidationError
from .experiment import BinaryExperiment, Experiment, LossFunction

FORMAT_VERSION = 1

_MATRIX_SCHEMA = {
    "type": "array",
    "items": {
        "type": "array",
        "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "required": ["version", "dim", "states"],
    "properties": {
        "version": {"const": FORMAT_VERSION},
        "dim": {"type": "integer", "minimum": 1},
        "states": {"type": "array", "minItems": 1, "items": _MATRIX_SCHEMA},
    },
}

LOSS_SCHEMA = {
    "type": "object",
    "required": ["version", "loss"],
    "properties": {
        "version": {"const": FORMAT_VERSION},
        "loss": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["version", "command"],
    "properties": {"version": {"const": FORMAT_VERSION}, "command": {"type": "string"}},
}


def encode_matrix(M: ArrayLike) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def decode_matrix(obj: Any, dim: int | None = None) -> NDArray[np.complex128]:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"matrix entries must be [re, im] number pairs ({exc})") from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"matrix must be an n x n array of [re, im] pairs, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValidationError(f"matrix has size {arr.shape[0]}, declared dim is {dim}")
    return arr[..., 0] + 1j * arr[..., 1]


def experiment_to_dict(E: Experiment) -> dict:
    return {"version": FORMAT_VERSION, "dim": E.dim, "states": [encode_matrix(r) for r in E.states]}


def experiment_from_dict(doc: Any) -> Experiment:
    if not isinstance(doc, dict):
        raise ValidationError("experiment document must be a JSON object")
    if doc.get("version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported or missing version {doc.get('version')!r}")
    for key in ("dim", "states"):
        if key not in doc:
            raise ValidationError(f"missing field {key!r}")
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ValidationError(f"dim must be a positive integer, got {dim!r}")
    states = doc["states"]
    if not isinstance(states, list) or not states:
        raise ValidationError("states must be a non-empty list")
    mats = tuple(decode_matrix(s, dim) for s in states)
    if len(mats) == 2:
        return BinaryExperiment(*mats)
    return Experiment(mats)


def loss_from_dict(doc: Any) -> LossFunction:
    if not isinstance(doc, dict) or doc.get("version") != FORMAT_VERSION or "loss" not in doc:
        raise ValidationError("loss document needs 'version': 1 and a 'loss' table")
    try:
        return LossFunction(np.asarray(doc["loss"], dtype=float))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad loss table: {exc}") from None


def read_json(path: str | Path) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None


def load_experiment(path: str | Path) -> Experiment:
    return experiment_from_dict(read_json(path))


def load_loss(path: str | Path) -> LossFunction:
    return loss_from_dict(read_json(path))


def save_experiment(E: Experiment, path: str | Path) -> None:
    Path(path).write_text(dumps(experiment_to_dict(E)))


def _plain(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays to JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj: Any) -> str:
    """Deterministic JSON: insertion-ordered keys, shortest round-trip floats."""
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"
