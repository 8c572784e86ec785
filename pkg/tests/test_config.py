"""Tests for configuration loading and writing.

Covers: defaults, [analysis]/[simulation] table loading, value validation,
environment variable overrides, depth-cap resolution, and write_config()
serialization with permission preservation.
"""

from __future__ import annotations

import os
import stat
import sys
import tomllib
from pathlib import Path
from unittest.mock import patch

import pytest

from statlin_access.config import (
    DEFAULT_DT,
    DEFAULT_PATHS,
    DEFAULT_TOLERANCE,
    Config,
    load_config,
    resolve_depth_cap,
    write_config,
)

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

FULL_TOML = """\
[analysis]
tolerance = 1e-10
depth_cap = 7
aux_probes = 5
certificate_retries = 20

[simulation]
dt = 0.01
paths = 2000
seed = 42
blowup_bound = 1e6
mc_chunk_size = 500
workers = 2
"""

PARTIAL_TOML = """\
[simulation]
paths = 100
"""

UNKNOWN_TABLES_TOML = """\
[plotting]
style = "dark"

[analysis]
tolerance = 1e-6
colour = "blue"
"""


@pytest.fixture()
def config_dir(tmp_path: Path) -> Path:
    """Create a temporary config directory."""
    return tmp_path / ".statlin-access"


def _write_config(config_dir: Path, content: str) -> Path:
    """Write TOML content to a config file in the given directory."""
    config_dir.mkdir(parents=True, exist_ok=True)
    config_path = config_dir / "config.toml"
    config_path.write_text(content)
    return config_path


def _load_with_config(config_dir: Path, content: str, env: dict[str, str] | None = None) -> Config:
    """Write config and load it, patching CONFIG_PATH and env vars."""
    config_path = _write_config(config_dir, content)
    clean_env = {"STATLIN_SEED": "", "STATLIN_TOL": ""}
    if env:
        clean_env.update(env)
    with (
        patch("statlin_access.config.CONFIG_PATH", config_path),
        patch.dict(os.environ, clean_env, clear=False),
    ):
        return load_config()


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


class TestDefaults:
    def test_no_config_file(self, tmp_path: Path) -> None:
        with patch.dict(os.environ, {"STATLIN_SEED": "", "STATLIN_TOL": ""}, clear=False):
            config = load_config(tmp_path / "absent.toml")
        assert config.tolerance == DEFAULT_TOLERANCE
        assert config.dt == DEFAULT_DT
        assert config.paths == DEFAULT_PATHS
        assert config.depth_cap is None
        assert config.seed == 0


class TestTomlLoading:
    """load_config() reads the [analysis] and [simulation] tables."""

    def test_full_file(self, config_dir: Path) -> None:
        config = _load_with_config(config_dir, FULL_TOML)
        assert config.tolerance == 1e-10
        assert config.depth_cap == 7
        assert config.aux_probes == 5
        assert config.certificate_retries == 20
        assert config.dt == 0.01
        assert config.paths == 2000
        assert config.seed == 42
        assert config.blowup_bound == 1e6
        assert config.mc_chunk_size == 500
        assert config.workers == 2

    def test_partial_file_keeps_defaults(self, config_dir: Path) -> None:
        config = _load_with_config(config_dir, PARTIAL_TOML)
        assert config.paths == 100
        assert config.tolerance == DEFAULT_TOLERANCE

    def test_unknown_tables_and_keys_ignored(self, config_dir: Path) -> None:
        config = _load_with_config(config_dir, UNKNOWN_TABLES_TOML)
        assert config.tolerance == 1e-6

    def test_non_positive_values_rejected(self, config_dir: Path) -> None:
        with pytest.raises(ValueError, match="depth_cap"):
            _load_with_config(config_dir, "[analysis]\ndepth_cap = 0\n")
        with pytest.raises(ValueError, match="dt must be positive"):
            _load_with_config(config_dir, "[simulation]\ndt = -0.1\n")
        with pytest.raises(ValueError, match="workers must be positive"):
            _load_with_config(config_dir, "[simulation]\nworkers = 0\n")


class TestEnvVarOverrides:
    """STATLIN_SEED and STATLIN_TOL override file values."""

    def test_seed_override(self, config_dir: Path) -> None:
        config = _load_with_config(config_dir, FULL_TOML, env={"STATLIN_SEED": "9"})
        assert config.seed == 9

    def test_tolerance_override(self, config_dir: Path) -> None:
        config = _load_with_config(config_dir, FULL_TOML, env={"STATLIN_TOL": "1e-4"})
        assert config.tolerance == 1e-4

    def test_empty_env_ignored(self, config_dir: Path) -> None:
        config = _load_with_config(config_dir, FULL_TOML, env={"STATLIN_SEED": ""})
        assert config.seed == 42

    def test_invalid_env_value(self, config_dir: Path) -> None:
        with pytest.raises(ValueError, match="Invalid STATLIN_SEED"):
            _load_with_config(config_dir, FULL_TOML, env={"STATLIN_SEED": "abc"})

    def test_negative_tolerance_env(self, config_dir: Path) -> None:
        with pytest.raises(ValueError, match="Invalid STATLIN_TOL"):
            _load_with_config(config_dir, FULL_TOML, env={"STATLIN_TOL": "-1"})


class TestResolveDepthCap:
    def test_default_is_twice_lifted_dimension_plus_one(self) -> None:
        assert Config().resolve_depth_cap(5) == 11

    def test_configured_value_wins(self) -> None:
        assert Config(depth_cap=3).resolve_depth_cap(5) == 3

    def test_module_helper_matches_method(self) -> None:
        assert resolve_depth_cap(None, 2) == 5
        assert resolve_depth_cap(4, 2) == 4

    def test_rank_checks_use_the_same_default(self) -> None:
        from statlin_access.rank_engine import check_rank_at_state
        from statlin_access.systems import ControlAffineSystem
        from statlin_access.vf_algebra import PolyMatrixMap, PolyVectorField

        system = ControlAffineSystem(
            (PolyVectorField.from_exprs(["-x1", "x2"]), PolyVectorField.from_exprs(["1", "0"])),
            PolyMatrixMap.constant([[1], [0]], 2),
        )
        report = check_rank_at_state(system, [], samples=1)
        assert report.depth_cap == Config().resolve_depth_cap(system.lifted_dim) == 11


# ---------------------------------------------------------------------------
# write_config()
# ---------------------------------------------------------------------------


class TestWriteConfig:
    """write_config() serializes Config to valid TOML."""

    def test_round_trip(self, tmp_path: Path) -> None:
        path = tmp_path / "config.toml"
        original = Config(tolerance=1e-9, depth_cap=4, paths=321, seed=8, workers=3)
        write_config(original, path)
        with patch.dict(os.environ, {"STATLIN_SEED": "", "STATLIN_TOL": ""}, clear=False):
            loaded = load_config(path)
        assert loaded == original

    def test_unset_depth_cap_omitted(self, tmp_path: Path) -> None:
        path = tmp_path / "config.toml"
        write_config(Config(), path)
        data = tomllib.loads(path.read_text())
        assert "depth_cap" not in data["analysis"]
        assert data["simulation"]["paths"] == DEFAULT_PATHS

    def test_creates_parent_directories(self, tmp_path: Path) -> None:
        path = tmp_path / "nested" / "dir" / "config.toml"
        write_config(Config(), path)
        assert path.exists()

    def test_header_comment(self, tmp_path: Path) -> None:
        path = tmp_path / "config.toml"
        write_config(Config(), path)
        assert path.read_text().startswith("# statlin-access configuration")

    @pytest.mark.skipif(sys.platform == "win32", reason="POSIX permissions")
    def test_preserves_permissions(self, tmp_path: Path) -> None:
        path = tmp_path / "config.toml"
        path.write_text("")
        path.chmod(0o600)
        write_config(Config(), path)
        assert stat.S_IMODE(path.stat().st_mode) == 0o600
