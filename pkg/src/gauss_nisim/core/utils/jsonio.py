"""Deterministic JSON output and binary sidecars.

Floats are always written with 17 significant digits so identical runs
produce byte-identical files and every value re-parses to the same double.
"""
from __future__ import annotations

import enum
import json
import math
from pathlib import Path
from typing import Any, Sequence, Union

import numpy as np
from pydantic import BaseModel

PathLike = Union[str, Path]


def _float_text(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = format(x, ".17g")
    if not any(ch in text for ch in ".en"):
        text += ".0"
    return text


def _encode(obj: Any, indent: int, level: int) -> str:
    if isinstance(obj, BaseModel):
        obj = obj.model_dump()
    if isinstance(obj, enum.Enum):
        obj = obj.value
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float_text(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)

    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # numeric rows stay on one line
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in obj):
            return "[" + ", ".join(_encode(v, 0, 0) for v in obj) + "]"
        return "[" + pad + sep.join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def dumps(obj: Any, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_json(path: PathLike, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path: PathLike) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_sidecar(path: PathLike, values: np.ndarray) -> Path:
    """Write a tensor as row-major little-endian float64."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(values, dtype="<f8").tofile(path)
    return path


def read_sidecar(path: PathLike, shape: Sequence[int]) -> np.ndarray:
    data = np.fromfile(Path(path), dtype="<f8")
    expected = int(np.prod(shape))
    if data.size != expected:
        raise ValueError(f"Sidecar {path} holds {data.size} values, expected {expected}")
    return data.reshape(tuple(shape)).astype(np.float64)
