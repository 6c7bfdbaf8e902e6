"""
Basic function families (vertex-valued unless stated otherwise).

1) basic.constant   - constant vector in R^k
2) basic.vertex     - constant vertex e_label
3) basic.halfspace  - e_0 where <a, x> > theta, e_1 elsewhere
4) basic.interval   - e_0 where lo <= x_coord <= hi, e_1 elsewhere
5) basic.plurality  - e_argmax(W x + b), ties to the lowest label
6) basic.hermite    - single basis element H_S placed in coordinate j (not simplex-valued)

Labels are 0-based.
"""

from typing import Any, Dict, List

import numpy as np

from ..core.functions import (
    FunctionForm,
    RangeRegion,
    VectorFunction,
    constant_function,
    vertex_function,
)
from ..core.hermite import HermiteExpansion, MultiIndex
from ..core.registry import BuilderSpec


# -------------------------------------------------------------------
# Internal helpers
# -------------------------------------------------------------------
def _positive_int(params: Dict[str, Any], key: str, default: Any = None) -> int:
    value = params.get(key, default)
    if value is None:
        raise ValueError(f"`{key}` is required")
    value = int(value)
    if value < 1:
        raise ValueError(f"`{key}` must be >= 1, got {value}")
    return value


def _vector(params: Dict[str, Any], key: str, length: int) -> np.ndarray:
    vec = np.asarray(params[key], dtype=float).reshape(-1)
    if vec.shape[0] != length:
        raise ValueError(f"`{key}` must have length {length}, got {vec.shape[0]}")
    return vec


# -------------------------------------------------------------------
# Builders
# -------------------------------------------------------------------
def build_constant(params: Dict[str, Any], context: Dict[str, Any]) -> VectorFunction:
    n = _positive_int(params, "n")
    return constant_function(n, np.asarray(params["value"], dtype=float), "constant")


def build_vertex(params: Dict[str, Any], context: Dict[str, Any]) -> VectorFunction:
    n, k = _positive_int(params, "n"), _positive_int(params, "k")
    label = int(params.get("label", 0))
    if not 0 <= label < k:
        raise ValueError(f"`label` must lie in [0, {k}), got {label}")
    value = np.zeros(k)
    value[label] = 1.0
    return constant_function(n, value, f"e_{label}")


def build_halfspace(params: Dict[str, Any], context: Dict[str, Any]) -> VectorFunction:
    n = _positive_int(params, "n")
    k = _positive_int(params, "k", 2)
    if k < 2:
        raise ValueError("halfspace needs k >= 2")
    if "normal" in params:
        normal = _vector(params, "normal", n)
    else:
        normal = np.zeros(n)
        normal[int(params.get("coord", 0))] = 1.0
    theta = float(params.get("theta", 0.0))
    return vertex_function(n, k, lambda x: np.where(x @ normal > theta, 0, 1), f"halfspace(theta={theta:g})")


def build_interval(params: Dict[str, Any], context: Dict[str, Any]) -> VectorFunction:
    n = _positive_int(params, "n")
    coord = int(params.get("coord", 0))
    lo, hi = float(params.get("lo", -np.inf)), float(params.get("hi", np.inf))
    if lo > hi:
        raise ValueError(f"Interval is empty: lo={lo} > hi={hi}")
    return vertex_function(n, 2, lambda x: np.where((x[:, coord] >= lo) & (x[:, coord] <= hi), 0, 1),
                           f"interval[{lo:g},{hi:g}]")


def build_plurality(params: Dict[str, Any], context: Dict[str, Any]) -> VectorFunction:
    n = _positive_int(params, "n")
    W = np.asarray(params["weights"], dtype=float)
    if W.ndim != 2 or W.shape[1] != n:
        raise ValueError(f"`weights` must be a k x {n} matrix")
    k = W.shape[0]
    b = _vector(params, "offsets", k) if "offsets" in params else np.zeros(k)
    return vertex_function(n, k, lambda x: np.argmax(x @ W.T + b, axis=1), f"plurality(k={k})")


def build_hermite(params: Dict[str, Any], context: Dict[str, Any]) -> VectorFunction:
    n, k = _positive_int(params, "n"), _positive_int(params, "k", 1)
    j = int(params.get("j", 0))
    S = MultiIndex(tuple(params["S"]))
    v = np.zeros(k)
    v[j] = float(params.get("scale", 1.0))
    expansion = HermiteExpansion(n, k, {S: v})
    return VectorFunction(n, k, expansion.evaluate, FunctionForm.TRUNCATED_SERIES, RangeRegion.ANY,
                          expansion, f"H{S.entries}")


# -------------------------------------------------------------------
# Registration
# -------------------------------------------------------------------
_N = {"type": "integer", "minimum": 1, "description": "Input dimension"}
_K = {"type": "integer", "minimum": 2, "description": "Number of outputs"}

BUILDERS: List[tuple] = [
    (BuilderSpec(slug="basic.constant", name="Constant",
                 description="Constant vector in R^k.",
                 parameters={"type": "object", "properties": {"n": _N, "value": {"type": "array", "items": {"type": "number"}}},
                             "required": ["n", "value"]}),
     build_constant),
    (BuilderSpec(slug="basic.vertex", name="Constant vertex",
                 description="Constant simplex vertex e_label.",
                 parameters={"type": "object", "properties": {"n": _N, "k": _K, "label": {"type": "integer", "minimum": 0}},
                             "required": ["n", "k"]}),
     build_vertex),
    (BuilderSpec(slug="basic.halfspace", name="Halfspace split",
                 description="e_0 where <normal, x> > theta, else e_1; normal defaults to a coordinate axis.",
                 parameters={"type": "object", "properties": {
                     "n": _N, "k": _K, "theta": {"type": "number"}, "coord": {"type": "integer", "minimum": 0},
                     "normal": {"type": "array", "items": {"type": "number"}}},
                     "required": ["n"]}),
     build_halfspace),
    (BuilderSpec(slug="basic.interval", name="Interval indicator",
                 description="e_0 where lo <= x_coord <= hi, else e_1.",
                 parameters={"type": "object", "properties": {
                     "n": _N, "coord": {"type": "integer", "minimum": 0}, "lo": {"type": "number"}, "hi": {"type": "number"}},
                     "required": ["n"]}),
     build_interval),
    (BuilderSpec(slug="basic.plurality", name="Plurality of linear forms",
                 description="e_argmax(W x + b).",
                 parameters={"type": "object", "properties": {
                     "n": _N, "weights": {"type": "array"}, "offsets": {"type": "array"}},
                     "required": ["n", "weights"]}),
     build_plurality),
    (BuilderSpec(slug="basic.hermite", name="Hermite basis element", form="truncated_series",
                 description="scale * H_S in output coordinate j.",
                 parameters={"type": "object", "properties": {
                     "n": _N, "k": {"type": "integer", "minimum": 1}, "S": {"type": "array", "items": {"type": "integer"}},
                     "j": {"type": "integer"}, "scale": {"type": "number"}},
                     "required": ["n", "S"]}),
     build_hermite),
]


def setup(registrar):
    """Register the basic families."""
    registrar.family(
        name="basic",
        description="Closed-form vertex-valued functions used as simulation targets",
        version="1.0.0",
    )
    for spec, builder in BUILDERS:
        registrar.builder(spec, builder)
