"""
Tests for the builtin function families and the registry.

A MockRegistrar captures what each family's setup() registers so builders
can be called directly, the same way plugins are exercised.
"""

import numpy as np
import pytest

from gauss_nisim.core.errors import ErrorCode, NisimError
from gauss_nisim.core.functions import FunctionForm
from gauss_nisim.core.hermite import HermiteExpansion, MultiIndex
from gauss_nisim.core.registry import BuilderSpec, FamilyRegistry
from gauss_nisim.extensions import function_from_json
from gauss_nisim.families.basic import setup as basic_setup
from gauss_nisim.families.serialized import setup as serialized_setup


class MockRegistrar:
    def __init__(self):
        self.families = {}
        self.specs = {}          # slug -> spec
        self.builders = {}       # slug -> builder

    def family(self, name: str, description: str, version: str):
        self.families[name] = {"description": description, "version": version}

    def builder(self, spec, builder):
        self.specs[spec.slug] = spec
        self.builders[spec.slug] = builder

    def call(self, slug: str, params: dict, context: dict = None):
        if context is None:
            context = {}
        builder = self.builders.get(slug)
        if not builder:
            raise KeyError(f"Builder not registered: {slug}")
        return builder(params, context)


@pytest.fixture
def reg():
    r = MockRegistrar()
    basic_setup(r)
    serialized_setup(r)
    return r


X = np.array([[-1.0, 0.5], [0.5, -1.0], [2.0, 2.0]])


class TestSetup:
    def test_families_registered(self, reg):
        assert set(reg.families) == {"basic", "serialized"}
        assert reg.families["basic"]["version"] == "1.0.0"

    def test_slugs_are_prefixed(self, reg):
        for slug in reg.specs:
            family, _, name = slug.partition(".")
            assert family in reg.families and name

    def test_parameter_schemas(self, reg):
        for spec in reg.specs.values():
            assert spec.parameters["type"] == "object"
            assert "required" in spec.parameters


class TestBasic:
    def test_vertex(self, reg):
        f = reg.call("basic.vertex", {"n": 2, "k": 3, "label": 2})
        assert np.array_equal(f(X), np.tile([0.0, 0.0, 1.0], (3, 1)))

    def test_vertex_label_range(self, reg):
        with pytest.raises(ValueError):
            reg.call("basic.vertex", {"n": 2, "k": 3, "label": 3})

    def test_halfspace_on_coordinate(self, reg):
        f = reg.call("basic.halfspace", {"n": 2, "coord": 1, "theta": 0.0})
        assert np.array_equal(f(X)[:, 0], [1.0, 0.0, 1.0])

    def test_halfspace_with_normal(self, reg):
        f = reg.call("basic.halfspace", {"n": 2, "normal": [1.0, 1.0], "theta": 1.0})
        assert np.array_equal(f(X)[:, 0], [0.0, 0.0, 1.0])

    def test_interval(self, reg):
        f = reg.call("basic.interval", {"n": 2, "coord": 0, "lo": -1.0, "hi": 1.0})
        assert np.array_equal(f(X)[:, 0], [1.0, 1.0, 0.0])

    def test_empty_interval(self, reg):
        with pytest.raises(ValueError):
            reg.call("basic.interval", {"n": 1, "lo": 1.0, "hi": 0.0})

    def test_plurality(self, reg):
        f = reg.call("basic.plurality", {"n": 2, "weights": [[1, 0], [0, 1], [-1, -1]]})
        assert f.k == 3
        assert np.argmax(f(X), axis=1).tolist() == [1, 0, 0]

    def test_plurality_shape(self, reg):
        with pytest.raises(ValueError):
            reg.call("basic.plurality", {"n": 3, "weights": [[1, 0], [0, 1]]})

    def test_hermite_element(self, reg):
        f = reg.call("basic.hermite", {"n": 2, "k": 2, "S": [1, 1], "j": 1, "scale": 2.0})
        assert f.form is FunctionForm.TRUNCATED_SERIES
        assert f(X)[:, 1] == pytest.approx(2.0 * X[:, 0] * X[:, 1])
        assert np.all(f(X)[:, 0] == 0)


class TestSerialized:
    def test_truncated_series(self, reg):
        e = HermiteExpansion(1, 2, {MultiIndex(): np.array([0.5, 0.5]), MultiIndex.of(1): np.array([0.2, -0.2])})
        f = reg.call("serialized.truncated_series", e.to_json())
        assert f.payload == e

    def test_projected_poly(self, reg):
        e = HermiteExpansion(1, 2, {MultiIndex(): np.array([0.5, 0.5]), MultiIndex.of(1): np.array([1.0, -1.0])})
        f = reg.call("serialized.projected_poly", {"form": "projected_poly", "inner": e.to_json()})
        np.testing.assert_allclose(f(np.array([[2.0]])), [[1.0, 0.0]])


class TestRegistry:
    def test_unknown_slug(self):
        r = FamilyRegistry()
        with pytest.raises(NisimError) as err:
            r.build("nope.missing", {})
        assert err.value.code is ErrorCode.UNKNOWN_FAMILY

    def test_bad_parameters_become_invalid_input(self):
        r = FamilyRegistry()
        basic_setup_target = MockRegistrar()
        basic_setup(basic_setup_target)
        spec = basic_setup_target.specs["basic.vertex"]
        r.register_builder(spec, basic_setup_target.builders["basic.vertex"])
        with pytest.raises(NisimError) as err:
            r.build("basic.vertex", {"n": 1})
        assert err.value.code is ErrorCode.INVALID_INPUT

    def test_list_specs_by_family(self):
        r = FamilyRegistry()
        spec = BuilderSpec(slug="demo.one", name="One", description="d", parameters={"type": "object"})
        r.register_family("demo", "Demo family")
        r.register_builder(spec, lambda p, c: None)
        assert r.list_specs("demo") == [spec]
        assert r.list_specs("other") == []
        assert [fam.name for fam in r.list_families()] == ["demo"]
        r.clear()
        assert r.list_families() == []

    def test_digest_tracks_registered_specs(self):
        r = FamilyRegistry()
        r.register_family("demo", "Demo family")
        empty = r.digest()
        spec = BuilderSpec(slug="demo.one", name="One", description="d", parameters={"type": "object"})
        r.register_builder(spec, lambda p, c: None)
        assert len(spec.digest()) == 64
        assert r.digest() != empty
        again = FamilyRegistry()
        again.register_family("demo", "Demo family")
        again.register_builder(spec, lambda p, c: None)
        assert again.digest() == r.digest()


class TestFunctionFromJson:
    def test_family_reference(self):
        f = function_from_json({"family": "basic.halfspace", "params": {"n": 1}})
        np.testing.assert_allclose(f(np.array([[1.0]])), [[1.0, 0.0]])

    def test_boost_output_is_unwrapped(self):
        e = HermiteExpansion(1, 2, {MultiIndex(): np.array([0.5, 0.5])})
        f = function_from_json({"iterations": 0, "function": {"form": "projected_poly", "inner": e.to_json()}})
        assert f.form is FunctionForm.PROJECTED_POLY

    def test_series_artifact(self):
        e = HermiteExpansion(1, 1, {MultiIndex.of(2): np.array([1.0])})
        assert function_from_json(e.to_json()).form is FunctionForm.TRUNCATED_SERIES

    def test_unrecognised_file(self):
        with pytest.raises(NisimError) as err:
            function_from_json({"hello": 1})
        assert err.value.code is ErrorCode.INVALID_INPUT
