"""Tests for deterministic JSON output and binary sidecars."""

import json
import math

import numpy as np
import pytest
from pydantic import BaseModel

from gauss_nisim.core.errors import ErrorCode
from gauss_nisim.core.utils.jsonio import dumps, read_json, read_sidecar, write_json, write_sidecar


class _Point(BaseModel):
    x: float
    label: str


class TestDumps:
    def test_floats_keep_seventeen_digits(self):
        assert dumps(1.0) == "1.0\n"
        assert dumps(0.1) == "0.10000000000000001\n"
        assert dumps(1e-20) == "9.9999999999999995e-21\n"

    def test_every_value_reparses_exactly(self):
        values = np.random.default_rng(0).normal(size=50).tolist()
        assert json.loads(dumps(values)) == values

    def test_non_finite(self):
        assert dumps([math.nan, math.inf, -math.inf], indent=0) == "[NaN, Infinity, -Infinity]\n"

    def test_single_line(self):
        assert dumps({"a": [1, 2], "b": None}, indent=0) == '{"a": [1, 2],"b": null}\n'

    def test_numpy_and_models(self):
        text = dumps({"m": np.eye(2), "p": _Point(x=2, label="q"), "c": ErrorCode.OUT_OF_BOX,
                      "flag": np.bool_(True), "i": np.int64(3)})
        data = json.loads(text)
        assert data == {"m": [[1.0, 0.0], [0.0, 1.0]], "p": {"x": 2.0, "label": "q"},
                        "c": "OUT_OF_BOX", "flag": True, "i": 3}

    def test_unsupported_type(self):
        with pytest.raises(TypeError):
            dumps({"s": {1, 2}})


class TestFiles:
    def test_write_and_read(self, tmp_path):
        path = write_json(tmp_path / "nested" / "out.json", {"v": 0.25})
        assert read_json(path) == {"v": 0.25}
        assert path.read_text().endswith("\n")

    def test_sidecar_round_trip(self, tmp_path):
        values = np.arange(24, dtype=float).reshape(2, 3, 4) / 7
        path = write_sidecar(tmp_path / "v.f8", values)
        assert path.stat().st_size == 24 * 8
        assert np.array_equal(read_sidecar(path, (2, 3, 4)), values)

    def test_sidecar_size_mismatch(self, tmp_path):
        path = write_sidecar(tmp_path / "v.f8", np.zeros(5))
        with pytest.raises(ValueError):
            read_sidecar(path, (2, 3))
