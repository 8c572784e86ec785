"""Configuration management for statlin-access.

Holds the numerical defaults used by the analyses (rank tolerance, bracket
depth cap, probe counts) and by the simulators (step size, Monte Carlo paths,
seed, blow-up bound, thread pool). Configuration is loaded from a TOML file
(~/.statlin-access/config.toml) with environment variable overrides; command
line flags override both.

Typical usage::

    from statlin_access.config import load_config

    config = load_config()
    tol = config.tolerance
    cap = config.resolve_depth_cap(lifted_dim=5)   # 2N + 1 = 11 when unset
"""

from __future__ import annotations

import os
import tomllib
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

APP_DIR = Path.home() / ".statlin-access"
CONFIG_PATH = APP_DIR / "config.toml"
REPORT_DIR = APP_DIR / "reports"

DEFAULT_TOLERANCE = 1e-8
DEFAULT_AUX_PROBES = 3
DEFAULT_DT = 1e-3
DEFAULT_PATHS = 10_000
DEFAULT_SEED = 0
DEFAULT_BLOWUP_BOUND = 1e8
DEFAULT_CERTIFICATE_RETRIES = 50
DEFAULT_MC_CHUNK_SIZE = 2_500
DEFAULT_WORKERS = 4

# TOML table → fields read from it.
_TABLES: dict[str, tuple[str, ...]] = {
    "analysis": ("tolerance", "depth_cap", "aux_probes", "certificate_retries"),
    "simulation": ("dt", "paths", "seed", "blowup_bound", "mc_chunk_size", "workers"),
}

# Env var name → (config field, parser).
_ENV_OVERRIDES: dict[str, tuple[str, type]] = {
    "STATLIN_SEED": ("seed", int),
    "STATLIN_TOL": ("tolerance", float),
}


def resolve_depth_cap(depth_cap: int | None, lifted_dim: int) -> int:
    """Return ``depth_cap``, or ``2N + 1`` when it is None.

    Args:
        depth_cap: Explicit bracket depth cap, or None.
        lifted_dim: Dimension N of the lifted state space.

    Returns:
        Bracket depth cap, at least 1.
    """
    if depth_cap is not None:
        return depth_cap
    return 2 * lifted_dim + 1


@dataclass
class Config:
    """Application configuration.

    Attributes:
        tolerance: Relative singular-value threshold for float ranks.
        depth_cap: Maximum bracket depth during saturation. None means 2N + 1
            for the lifted dimension N of the system under study.
        aux_probes: Random rational probe points added to the retention test so
            pruning reflects field independence, not coincidences at one point.
        certificate_retries: Random draws allowed when searching for a
            biaffine witness state.
        dt: Integration step for the ODE and SDE simulators.
        paths: Monte Carlo path count.
        seed: Master seed for every random draw.
        blowup_bound: Norm above which a trajectory or path is declared
            divergent.
        mc_chunk_size: Paths per Monte Carlo chunk (one RNG stream each).
        workers: Thread pool size for Monte Carlo chunks.
    """

    tolerance: float = DEFAULT_TOLERANCE
    depth_cap: int | None = None
    aux_probes: int = DEFAULT_AUX_PROBES
    certificate_retries: int = DEFAULT_CERTIFICATE_RETRIES
    dt: float = DEFAULT_DT
    paths: int = DEFAULT_PATHS
    seed: int = DEFAULT_SEED
    blowup_bound: float = DEFAULT_BLOWUP_BOUND
    mc_chunk_size: int = DEFAULT_MC_CHUNK_SIZE
    workers: int = DEFAULT_WORKERS

    def resolve_depth_cap(self, lifted_dim: int) -> int:
        """Return the configured depth cap, or ``2N + 1`` when unset."""
        return resolve_depth_cap(self.depth_cap, lifted_dim)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(name: str, value: Any) -> Any:
    """Coerce a TOML value to the type of the matching Config field.

    Raises:
        ValueError: If the value cannot be interpreted.
    """
    if name == "depth_cap":
        cap = int(value)
        if cap < 1:
            raise ValueError(f"depth_cap must be at least 1, got {cap}")
        return cap
    if name in ("tolerance", "dt", "blowup_bound"):
        out = float(value)
        if out <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
        return out
    out_int = int(value)
    if name != "seed" and out_int < 1:
        raise ValueError(f"{name} must be positive, got {value}")
    return out_int


def _apply_toml(config: Config, data: dict[str, Any]) -> None:
    """Apply parsed TOML data to a Config instance.

    Unknown tables and keys are ignored so older files keep loading.

    Args:
        config: Config instance to populate.
        data: Parsed TOML dictionary.
    """
    for table, names in _TABLES.items():
        section: dict[str, Any] = data.get(table, {})
        for name in names:
            if name in section:
                setattr(config, name, _coerce(name, section[name]))


def _apply_env_overrides(config: Config) -> None:
    """Apply environment variable overrides.

    Raises:
        ValueError: If a variable is set to an unparsable value.
    """
    for env_var, (name, parser) in _ENV_OVERRIDES.items():
        raw = os.environ.get(env_var, "")
        if not raw:
            continue
        try:
            setattr(config, name, _coerce(name, parser(raw)))
        except ValueError as exc:
            raise ValueError(f"Invalid {env_var}={raw!r}: {exc}") from exc


def load_config(path: Path | None = None) -> Config:
    """Load configuration from file and environment.

    Resolution order (highest first):
        1. Environment variables (STATLIN_SEED, STATLIN_TOL)
        2. ``[analysis]`` / ``[simulation]`` tables in config.toml
        3. Built-in defaults

    Args:
        path: Config file to read. Defaults to CONFIG_PATH.

    Returns:
        Populated Config instance.
    """
    config = Config()
    target = path or CONFIG_PATH

    if target.exists():
        with open(target, "rb") as f:
            _apply_toml(config, tomllib.load(f))

    _apply_env_overrides(config)

    return config


def write_config(config: Config, path: Path | None = None) -> None:
    """Serialize a Config to TOML and write to disk.

    If the file already exists, its permissions are preserved after write.
    An unset depth cap is omitted, since TOML has no null.

    Args:
        config: Config instance to serialize.
        path: File path to write. Defaults to CONFIG_PATH.
    """
    import tomlkit

    target = path or CONFIG_PATH

    existing_mode: int | None = None
    if target.exists():
        existing_mode = target.stat().st_mode & 0o777

    doc = tomlkit.document()
    doc.add(tomlkit.comment("statlin-access configuration"))
    for table_name, names in _TABLES.items():
        table = tomlkit.table()
        for name in names:
            value = getattr(config, name)
            if value is not None:
                table.add(name, value)
        doc.add(table_name, table)

    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(tomlkit.dumps(doc), encoding="utf-8")

    if existing_mode is not None:
        target.chmod(existing_mode)


def ensure_dirs() -> None:
    """Create application directories if they don't exist."""
    REPORT_DIR.mkdir(parents=True, exist_ok=True)
