"""Tests for the gauss-nisim command line."""

import json
import math

import pytest

from gauss_nisim.main import create_parser, main

pytestmark = pytest.mark.cli


@pytest.fixture
def halfspace_file(tmp_path):
    path = tmp_path / "halfspace.json"
    path.write_text(json.dumps({"family": "basic.halfspace", "params": {"n": 1}}))
    return str(path)


def _stderr_json(text, key):
    """Last JSON object on stderr that carries ``key``; log lines are skipped."""
    for line in reversed(text.strip().splitlines()):
        if line.startswith("{") and key in json.loads(line):
            return json.loads(line)
    raise AssertionError(f"no JSON line with {key!r} on stderr")


def _error(capsys):
    return _stderr_json(capsys.readouterr().err, "error")


class TestMaxcorr:
    def test_equality_distribution(self, tmp_path, capsys):
        path = tmp_path / "eq.json"
        path.write_text(json.dumps([[0.5, 0.0], [0.0, 0.5]]))
        assert main(["maxcorr", str(path)]) == 0
        assert capsys.readouterr().out == "1.0\n"

    def test_object_input_and_output_file(self, tmp_path, capsys):
        path = tmp_path / "bsc.json"
        path.write_text(json.dumps({"mass": [[0.45, 0.05], [0.05, 0.45]]}))
        out = tmp_path / "out.json"
        assert main(["maxcorr", str(path), "-o", str(out)]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.8, abs=1e-10)
        assert json.loads(out.read_text())["degenerate"] is False

    def test_missing_input(self, capsys):
        assert main(["maxcorr"]) == 2
        assert _error(capsys)["error"] == "INVALID_CONFIG"


class TestDecideK2:
    def test_infeasible_exit_code(self, capsys):
        code = main(["decide-k2", "--rho", "0.5", "--mu1", "0.5", "--mu2", "0.5", "--eta", "0.9"])
        assert code == 3
        verdict = json.loads(capsys.readouterr().out)
        assert verdict["status"] == "INFEASIBLE"
        assert verdict["gap"] == pytest.approx(0.9 - 2 / 3, abs=1e-6)

    def test_feasible_from_time(self, capsys):
        code = main(["decide-k2", "--t", str(math.log(2)), "--mu1", "0.5", "--mu2", "0.5", "--eta", "0.6"])
        assert code == 0
        verdict = json.loads(capsys.readouterr().out)
        assert verdict["status"] == "FEASIBLE"
        assert verdict["rho"] == pytest.approx(0.5)

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"rho": 0.5, "mu1": 0.5, "mu2": 0.5, "eta": 0.9}))
        assert main(["decide-k2", "--config", str(cfg), "--eta", "0.6"]) == 0
        assert json.loads(capsys.readouterr().out)["status"] == "FEASIBLE"

    def test_rho_and_t_together(self, capsys):
        code = main(["decide-k2", "--rho", "0.5", "--t", "1", "--mu1", "0.5", "--mu2", "0.5", "--eta", "0.6"])
        assert code == 2
        assert _error(capsys)["error"] == "INVALID_CONFIG"


class TestTable:
    def test_independent_sources_match_product(self, halfspace_file, capsys):
        args = ["table", "--f", halfspace_file, "--g", halfspace_file, "--rho", "0",
                "--samples", "20000", "--seed", "1", "--compare", "product"]
        assert main(args) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["k"] == 2
        assert out["tv"] <= 3 * out["aggregate_stderr"]

    def test_reruns_are_byte_identical(self, halfspace_file, capsys):
        args = ["table", "--f", halfspace_file, "--g", halfspace_file, "--rho", "0.5",
                "--samples", "5000", "--seed", "7", "--threads", "2"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first

    def test_csv_output(self, halfspace_file, capsys):
        args = ["table", "--f", halfspace_file, "--g", halfspace_file, "--rho", "0.5",
                "--samples", "1000", "--seed", "2", "--format", "csv"]
        assert main(args) == 0
        assert capsys.readouterr().out.splitlines()[0] == "i,j,entry,stderr"

    def test_header_records_seed(self, halfspace_file, capsys):
        main(["table", "--f", halfspace_file, "--g", halfspace_file, "--rho", "0.5",
              "--samples", "1000", "--seed", "3"])
        header = _stderr_json(capsys.readouterr().err, "streams")
        assert header["seed"] == 3
        assert header["streams"]["table"] == 10_000
        assert header["families"] == {"basic": "1.0.0", "serialized": "1.0.0"}
        assert len(header["registry_digest"]) == 64

    def test_seed_is_required(self, halfspace_file, capsys):
        args = ["table", "--f", halfspace_file, "--g", halfspace_file, "--rho", "0.5", "--samples", "1000"]
        assert main(args) == 2
        assert _error(capsys)["error"] == "INVALID_CONFIG"


class TestExpandAndBoost:
    def test_expand_halfspace(self, halfspace_file, capsys):
        assert main(["expand", "--f", halfspace_file, "--degree", "1", "--nodes", "200"]) == 0
        out = json.loads(capsys.readouterr().out)
        first = next(c for c in out["coeffs"] if c["S"] == [1])
        assert first["v"][0] == pytest.approx(1 / math.sqrt(2 * math.pi), abs=5e-3)

    def test_boost_writes_trace(self, halfspace_file, tmp_path, capsys):
        out = tmp_path / "boost.json"
        assert main(["boost", "--f", halfspace_file, "--degree", "3", "--delta", "0.05", "-o", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["mismatch"] <= 0.05
        assert data["function"]["form"] == "projected_poly"
        assert (tmp_path / "boost.trace.csv").read_text().startswith("t,rho_sq,psi,alignment\n")

    def test_boost_output_feeds_table(self, halfspace_file, tmp_path, capsys):
        out = tmp_path / "boost.json"
        main(["boost", "--f", halfspace_file, "--degree", "2", "--delta", "0.1", "-o", str(out)])
        code = main(["table", "--f", str(out), "--g", halfspace_file, "--rho", "0.5",
                     "--samples", "2000", "--seed", "4"])
        assert code == 0


class TestErrors:
    def test_unknown_command(self, capsys):
        assert main(["nope"]) == 2
        err = _error(capsys)
        assert err["error"] == "USAGE"

    def test_no_command(self, capsys):
        assert main([]) == 2
        assert _error(capsys)["error"] == "USAGE"

    def test_missing_required_field(self, capsys):
        assert main(["expand", "--degree", "2"]) == 2
        err = _error(capsys)
        assert err["error"] == "INVALID_CONFIG"
        assert err["detail"]["errors"]

    def test_missing_function_file(self, tmp_path, capsys):
        assert main(["expand", "--f", str(tmp_path / "absent.json"), "--degree", "1"]) == 2

    def test_unknown_family(self, tmp_path, capsys):
        path = tmp_path / "f.json"
        path.write_text(json.dumps({"family": "basic.nothing", "params": {}}))
        assert main(["expand", "--f", str(path), "--degree", "1"]) == 2
        assert _error(capsys)["error"] == "UNKNOWN_FAMILY"

    def test_parser_lists_commands(self):
        parser = create_parser()
        ns = parser.parse_args(["smooth", "--f", "a", "--g", "b", "--no-strict"])
        assert ns.command == "smooth" and ns.strict is False


@pytest.mark.integration
def test_smooth_then_table(halfspace_file, tmp_path, capsys):
    out_dir = tmp_path / "smoothed"
    args = ["smooth", "--f", halfspace_file, "--g", halfspace_file, "--t", str(math.log(2)),
            "--delta", "0.2", "--seed", "5", "--samples", "5000", "--cap", "2000", "--no-strict",
            "-o", str(out_dir)]
    assert main(args) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["report"]["m"] == 10
    assert (out_dir / "report.json").exists()
    assert list(out_dir.glob("*.f8"))

    code = main(["table", "--f", str(out_dir / "f1.json"), "--g", str(out_dir / "g1.json"),
                 "--rho", "0.5", "--samples", "2000", "--seed", "6"])
    assert code == 0
    table = json.loads(capsys.readouterr().out)
    assert all(0.0 <= v <= 1.0 for row in table["entries"] for v in row)
