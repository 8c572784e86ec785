"""Tests for the ``config`` command group.

Covers: ``config path``, ``config show`` with and without a file, environment
overrides in the shown values, and ``config init`` with and without --force.
"""

from __future__ import annotations

import tomllib
from pathlib import Path

import pytest
from click.testing import CliRunner
from rich.console import Console

from statlin_access.cli import main

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


@pytest.fixture()
def config_path(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Redirect CONFIG_PATH (both module bindings) into tmp_path."""
    path = tmp_path / ".statlin-access" / "config.toml"
    monkeypatch.setattr("statlin_access.config.CONFIG_PATH", path)
    monkeypatch.setattr("statlin_access.cli.CONFIG_PATH", path)
    monkeypatch.setattr("statlin_access.cli.console", Console(stderr=True, width=300))
    monkeypatch.setattr("statlin_access.display.console", Console(width=300))
    monkeypatch.delenv("STATLIN_SEED", raising=False)
    monkeypatch.delenv("STATLIN_TOL", raising=False)
    return path


# ---------------------------------------------------------------------------
# config path / show
# ---------------------------------------------------------------------------


class TestConfigPath:
    def test_prints_path(self, config_path: Path) -> None:
        result = CliRunner().invoke(main, ["config", "path"])
        assert result.exit_code == 0
        assert result.output.strip() == str(config_path)


class TestConfigShow:
    """``config show`` renders the effective configuration."""

    def test_defaults_without_file(self, config_path: Path) -> None:
        result = CliRunner().invoke(main, ["config", "show"])
        assert result.exit_code == 0
        assert "not found" in result.output
        assert "2N+1" in result.output

    def test_file_values_shown(self, config_path: Path) -> None:
        config_path.parent.mkdir(parents=True)
        config_path.write_text("[simulation]\npaths = 1234\n")
        result = CliRunner().invoke(main, ["config", "show"])
        assert result.exit_code == 0
        assert "exists" in result.output
        assert "1234" in result.output

    def test_env_override_shown(self, config_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv("STATLIN_SEED", "777")
        result = CliRunner().invoke(main, ["config", "show"])
        assert result.exit_code == 0
        assert "777" in result.output

    def test_invalid_env_is_an_error(
        self, config_path: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        monkeypatch.setenv("STATLIN_TOL", "loose")
        result = CliRunner().invoke(main, ["config", "show"])
        assert result.exit_code == 1
        assert "Invalid STATLIN_TOL" in result.output


# ---------------------------------------------------------------------------
# config init
# ---------------------------------------------------------------------------


class TestConfigInit:
    def test_writes_defaults(self, config_path: Path) -> None:
        result = CliRunner().invoke(main, ["config", "init"])
        assert result.exit_code == 0, result.output
        assert "Config written" in result.output
        data = tomllib.loads(config_path.read_text())
        assert set(data) == {"analysis", "simulation"}

    def test_refuses_to_overwrite(self, config_path: Path) -> None:
        config_path.parent.mkdir(parents=True)
        config_path.write_text("[simulation]\npaths = 5\n")
        result = CliRunner().invoke(main, ["config", "init"])
        assert result.exit_code == 1
        assert "--force" in result.output
        assert "paths = 5" in config_path.read_text()

    def test_force_overwrites(self, config_path: Path) -> None:
        config_path.parent.mkdir(parents=True)
        config_path.write_text("[simulation]\npaths = 5\n")
        result = CliRunner().invoke(main, ["config", "init", "--force"])
        assert result.exit_code == 0
        assert tomllib.loads(config_path.read_text())["simulation"]["paths"] == 10_000
