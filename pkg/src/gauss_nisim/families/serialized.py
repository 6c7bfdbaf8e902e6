"""Families that rebuild functions from files written by the library itself.

The builder context may carry ``base_dir``, used to resolve binary sidecars.
"""

from typing import Any, Dict

from ..core.bernstein import FactoredPolyMap
from ..core.boosting import ProjectedPolynomial
from ..core.functions import FunctionForm, RangeRegion, VectorFunction
from ..core.hermite import HermiteExpansion
from ..core.ppf import PpfMixture
from ..core.registry import BuilderSpec


def build_truncated_series(params: Dict[str, Any], context: Dict[str, Any]) -> VectorFunction:
    expansion = HermiteExpansion.from_json(params)
    return VectorFunction(expansion.n, expansion.k, expansion.evaluate, FunctionForm.TRUNCATED_SERIES,
                          RangeRegion.ANY, expansion, "series")


def build_projected_poly(params: Dict[str, Any], context: Dict[str, Any]) -> VectorFunction:
    return ProjectedPolynomial.from_json(params).as_function()


def build_factored_poly(params: Dict[str, Any], context: Dict[str, Any]) -> VectorFunction:
    return FactoredPolyMap.from_json(params, context.get("base_dir")).as_function()


def build_ppf_mixture(params: Dict[str, Any], context: Dict[str, Any]) -> VectorFunction:
    base_dir = context.get("base_dir")
    maps = {key: FactoredPolyMap.from_json(data, base_dir) for key, data in params.get("maps", {}).items()}
    return PpfMixture.from_json(params, maps).as_function("mixture")


def setup(registrar):
    registrar.family(
        name="serialized",
        description="Expansions, projected polynomials, factored maps and PPF mixtures read back from JSON",
        version="1.0.0",
    )
    registrar.builder(BuilderSpec(slug="serialized.truncated_series", name="Hermite series",
                                  description="HermiteExpansion JSON {n, k, coeffs}.",
                                  parameters={"type": "object", "required": ["n", "k", "coeffs"]},
                                  form="truncated_series"),
                      build_truncated_series)
    registrar.builder(BuilderSpec(slug="serialized.projected_poly", name="Projected polynomial",
                                  description="Proj of a Hermite series {form, inner}.",
                                  parameters={"type": "object", "required": ["inner"]},
                                  form="projected_poly"),
                      build_projected_poly)
    registrar.builder(BuilderSpec(slug="serialized.factored_poly", name="Factored polynomial map",
                                  description="Bernstein approximant composed with Hermite polynomials.",
                                  parameters={"type": "object", "required": ["inner", "outer"]},
                                  form="factored_poly"),
                      build_factored_poly)
    registrar.builder(BuilderSpec(slug="serialized.ppf_mixture", name="PPF mixture",
                                  description="Weighted PPF terms with their factored maps.",
                                  parameters={"type": "object", "required": ["n", "k", "terms"]},
                                  form="ppf_mixture"),
                      build_ppf_mixture)
