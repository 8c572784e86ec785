"""Tests for the analysis commands of the CLI.

Covers: ``check`` exit codes for pass, fail, inconclusive and error, the
``--points`` and state-condition options, deterministic ``--json`` output,
``biaffine``, ``simulate`` (all three methods, ``--out`` files, ``--probe``),
and ``genericity``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest
from click.testing import CliRunner
from rich.console import Console

from statlin_access.cli import main

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


@pytest.fixture(autouse=True)
def isolated_app(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Point config and reports at tmp_path and widen the consoles."""
    app_dir = tmp_path / ".statlin-access"
    monkeypatch.setattr("statlin_access.config.CONFIG_PATH", app_dir / "config.toml")
    monkeypatch.setattr("statlin_access.cli.CONFIG_PATH", app_dir / "config.toml")
    monkeypatch.setattr("statlin_access.config.REPORT_DIR", app_dir / "reports")
    monkeypatch.setattr("statlin_access.cli.console", Console(stderr=True, width=300))
    monkeypatch.setattr("statlin_access.display.console", Console(width=300))
    monkeypatch.delenv("STATLIN_SEED", raising=False)
    monkeypatch.delenv("STATLIN_TOL", raising=False)
    return app_dir


def _term(exponents: list[int], coeff: str) -> dict[str, Any]:
    return {"exponents": exponents, "coeff": coeff}


def _scalar_quadratic() -> dict[str, Any]:
    """dx = (x^2 + u) dt + dW / 10, accessible at every point."""
    return {
        "schema": 1,
        "n": 1,
        "m_u": 1,
        "d": 1,
        "drift": [[[_term([2], "1")]], [[_term([0], "1")]]],
        "diffusion": [[[_term([0], "1/10")]]],
        "points": [["1"], ["-1/2"]],
    }


def _scalar_linear() -> dict[str, Any]:
    """dx = (x + u x) dt: the bracket family never spans the lifted space."""
    return {
        "schema": 1,
        "n": 1,
        "m_u": 1,
        "d": 1,
        "drift": [[[_term([1], "1")]], [[_term([1], "1")]]],
        "diffusion": [[[_term([0], "0")]]],
        "points": [["1"]],
    }


def _ornstein_uhlenbeck() -> dict[str, Any]:
    """dx = (-x + u) dt + dW / 2 with a simulation section."""
    return {
        "schema": 1,
        "n": 1,
        "m_u": 1,
        "d": 1,
        "drift": [[[_term([1], "-1")]], [[_term([0], "1")]]],
        "diffusion": [[[_term([0], "1/2")]]],
        "control": {"values": [["0"]], "horizon": "1"},
        "simulation": {"m0": ["1"], "P0": [["1/2"]], "dt": "1/100", "paths": 200},
        "seed": 3,
    }


def _biaffine() -> dict[str, Any]:
    return {
        "schema": 1,
        "n": 2,
        "m_u": 2,
        "d": 2,
        "biaffine": {
            "A": [
                [["0", "0"], ["0", "0"]],
                [["0", "1"], ["0", "0"]],
                [["1", "0"], ["1", "0"]],
            ],
            "g": [["1", "0"], ["0", "1"]],
        },
    }


def _write_spec(tmp_path: Path, data: dict[str, Any], name: str = "system.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


class TestCheckExitCodes:
    """``check`` exits 0 pass, 2 fail, 3 inconclusive, 1 error."""

    def test_pass(self, tmp_path: Path) -> None:
        result = CliRunner().invoke(main, ["check", _write_spec(tmp_path, _scalar_quadratic())])
        assert result.exit_code == 0, result.output
        assert "pass" in result.output

    def test_fail(self, tmp_path: Path) -> None:
        result = CliRunner().invoke(main, ["check", _write_spec(tmp_path, _scalar_linear())])
        assert result.exit_code == 2
        assert "fail" in result.output

    def test_inconclusive_at_cap(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _scalar_quadratic())
        result = CliRunner().invoke(main, ["check", spec, "--condition", "2", "--depth", "1"])
        assert result.exit_code == 3
        assert "inconclusive-at-cap" in result.output

    def test_malformed_json(self, tmp_path: Path) -> None:
        path = tmp_path / "broken.json"
        path.write_text('{\n  "schema": 1,\n  "n": \n}', encoding="utf-8")
        result = CliRunner().invoke(main, ["check", str(path)])
        assert result.exit_code == 1
        assert "line 4" in result.output

    def test_missing_file(self, tmp_path: Path) -> None:
        result = CliRunner().invoke(main, ["check", str(tmp_path / "absent.json")])
        assert result.exit_code == 1
        assert "Cannot read" in result.output


class TestCheckOptions:
    def test_json_output_is_deterministic(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _scalar_quadratic())
        args = ["--log-level", "ERROR", "check", spec, "--json", "--generic", "--seed", "5"]
        first = CliRunner().invoke(main, args)
        second = CliRunner().invoke(main, args)
        assert first.exit_code == 0
        assert first.output == second.output
        data = json.loads(first.output)
        assert data["overall"] == "pass"
        assert data["generic_rank"] == 2

    def test_points_override_spec(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _scalar_quadratic())
        result = CliRunner().invoke(
            main, ["--log-level", "ERROR", "check", spec, "--points", "2;1/3;0", "--json"]
        )
        assert result.exit_code == 0
        assert json.loads(result.output)["points"] == [{"m": ["2"]}, {"m": ["1/3"]}, {"m": ["0"]}]

    def test_bad_points(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _scalar_quadratic())
        result = CliRunner().invoke(main, ["check", spec, "--points", "1,2"])
        assert result.exit_code == 1
        assert "expected 1" in result.output

    def test_no_points(self, tmp_path: Path) -> None:
        data = _scalar_quadratic()
        del data["points"]
        result = CliRunner().invoke(main, ["check", _write_spec(tmp_path, data)])
        assert result.exit_code == 1
        assert "No points" in result.output

    def test_state_condition_with_samples(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _scalar_quadratic())
        result = CliRunner().invoke(
            main,
            ["--log-level", "ERROR", "check", spec, "--condition", "state", "--samples", "3", "--json"],
        )
        assert result.exit_code == 0, result.output
        data = json.loads(result.output)
        assert data["condition"] == "lifted_at_state"
        assert len(data["points"]) == 3

    def test_state_condition_needs_states(self, tmp_path: Path) -> None:
        data = _scalar_quadratic()
        del data["points"]
        result = CliRunner().invoke(
            main, ["check", _write_spec(tmp_path, data), "--condition", "state"]
        )
        assert result.exit_code == 1
        assert "state condition" in result.output

    def test_save(self, tmp_path: Path, isolated_app: Path) -> None:
        spec = _write_spec(tmp_path, _scalar_quadratic())
        result = CliRunner().invoke(main, ["check", spec, "--save"])
        assert result.exit_code == 0
        assert "Report saved: check_" in result.output
        assert len(list((isolated_app / "reports").glob("check_*.json"))) == 1


# ---------------------------------------------------------------------------
# biaffine
# ---------------------------------------------------------------------------


class TestBiaffineCommand:
    def test_hypotheses_hold(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _biaffine())
        result = CliRunner().invoke(
            main, ["--log-level", "ERROR", "biaffine", spec, "--samples", "5", "--json"]
        )
        assert result.exit_code == 0, result.output
        data = json.loads(result.output)
        assert data["lie_dim"] == 4
        assert data["hypothesis_i"] and data["hypothesis_ii"]

    def test_rendered(self, tmp_path: Path) -> None:
        result = CliRunner().invoke(
            main, ["biaffine", _write_spec(tmp_path, _biaffine()), "--samples", "3"]
        )
        assert result.exit_code == 0
        assert "accessible in fixed time" in result.output

    def test_requires_biaffine_section(self, tmp_path: Path) -> None:
        result = CliRunner().invoke(main, ["biaffine", _write_spec(tmp_path, _scalar_quadratic())])
        assert result.exit_code == 1
        assert "biaffine" in result.output


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


class TestSimulateCommand:
    def test_rk4_writes_outputs(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _ornstein_uhlenbeck())
        out = tmp_path / "run"
        result = CliRunner().invoke(main, ["simulate", spec, "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = (out / "trajectory.csv").read_text().splitlines()
        assert lines[0] == "time,m1,P11,pd"
        assert len(lines) == 102
        summary = json.loads((out / "summary.json").read_text())
        assert summary["method"] == "rk4"
        assert summary["dt"] == 0.01
        assert summary["m_final"][0] == pytest.approx(0.36787944, rel=1e-6)

    def test_closed_form_json(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _ornstein_uhlenbeck())
        result = CliRunner().invoke(
            main, ["--log-level", "ERROR", "simulate", spec, "--method", "closedform", "--json"]
        )
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["method"] == "closedform"

    def test_monte_carlo(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _ornstein_uhlenbeck())
        out = tmp_path / "mc"
        result = CliRunner().invoke(
            main,
            ["--log-level", "ERROR", "simulate", spec, "--method", "mc", "--paths", "50", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        header = (out / "trajectory.csv").read_text().splitlines()[0]
        assert header == "time,m1,P11,se_m1,se_P11"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["paths"] == 50
        assert summary["seed"] == 3

    def test_probe(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _ornstein_uhlenbeck())
        result = CliRunner().invoke(
            main,
            ["--log-level", "ERROR", "simulate", spec, "--dt", "0.05", "--probe", "--json"],
        )
        assert result.exit_code == 0, result.output
        data = json.loads(result.output)
        assert data["accessibility"]["target"] == 2
        assert data["dt"] == 0.05

    def test_endpoint_rank_full_with_single_segment_control(self, tmp_path: Path) -> None:
        data = _scalar_quadratic()
        data["control"] = {"values": [["3/10"]], "horizon": "1/2"}
        data["simulation"] = {"m0": ["1/2"], "P0": [["1"]], "dt": "1/100"}
        result = CliRunner().invoke(
            main,
            ["--log-level", "ERROR", "simulate", _write_spec(tmp_path, data), "--probe", "--json"],
        )
        assert result.exit_code == 0, result.output
        probe = json.loads(result.output)["accessibility"]
        assert probe["conclusive"]
        assert probe["rank"] == probe["target"] == 2

    def test_never_writes_report_archive(self, tmp_path: Path, isolated_app: Path) -> None:
        spec = _write_spec(tmp_path, _ornstein_uhlenbeck())
        result = CliRunner().invoke(main, ["simulate", spec, "--out", str(tmp_path / "run")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "run" / "summary.json").exists()
        assert not (isolated_app / "reports").exists()
        rejected = CliRunner().invoke(main, ["simulate", spec, "--save"])
        assert rejected.exit_code == 2
        assert "No such option" in rejected.output

    def test_requires_initial_moments(self, tmp_path: Path) -> None:
        result = CliRunner().invoke(main, ["simulate", _write_spec(tmp_path, _scalar_quadratic())])
        assert result.exit_code == 1
        assert "simulation.m0" in result.output


# ---------------------------------------------------------------------------
# genericity
# ---------------------------------------------------------------------------


class TestGenericityCommand:
    def test_json(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _scalar_quadratic())
        result = CliRunner().invoke(
            main,
            ["--log-level", "ERROR", "genericity", spec, "--trials", "3", "--eps", "1/20", "--json"],
        )
        assert result.exit_code == 0, result.output
        data = json.loads(result.output)
        assert data["trials"] == 3
        assert data["epsilon"] == "1/20"
        assert data["points"] == [{"m": ["1"]}, {"m": ["-1/2"]}]

    def test_bad_epsilon(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _scalar_quadratic())
        result = CliRunner().invoke(main, ["genericity", spec, "--eps", "tiny"])
        assert result.exit_code == 1
        assert "rational" in result.output

    def test_hormander_needs_two_controls(self, tmp_path: Path) -> None:
        spec = _write_spec(tmp_path, _scalar_quadratic())
        result = CliRunner().invoke(
            main, ["genericity", spec, "--condition", "hormander", "--trials", "1"]
        )
        assert result.exit_code == 1
