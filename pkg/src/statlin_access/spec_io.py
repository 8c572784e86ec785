"""Parse and serialize system specification files (JSON, ``"schema": 1``).

Coefficients are rational strings (``"p/q"``) so nothing enters the exact
pipeline as a float. Errors carry a 1-based line and column: from the JSON
decoder for malformed text, or the line of the offending key for well-formed
but invalid content.

Typical usage::

    from statlin_access.spec_io import load_spec

    spec = load_spec(Path("system.json"))
    spec.system.n, spec.points
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import sympy as sp

from statlin_access.biaffine import BiaffineSystem
from statlin_access.lift import StatePoint
from statlin_access.simulate import ControlSignal
from statlin_access.systems import ControlAffineSystem
from statlin_access.vf_algebra import Polynomial, PolyMatrixMap, PolyVectorField, to_exact

SCHEMA_VERSION = 1


class SpecParseError(ValueError):
    """Invalid specification, with the location of the problem.

    Attributes:
        line: 1-based line, or 0 when unknown.
        column: 1-based column, or 0 when unknown.
    """

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """A parsed specification file.

    Attributes:
        system: The control-affine system.
        biaffine: Matrix form when the file gives one.
        points: Check points ``m`` with rational entries.
        states: Check states ``(m, P)``.
        control_values: Piecewise-constant control rows, or None.
        horizon: Control horizon ``T``, or None.
        m0: Initial mean for simulations, or None.
        P0: Initial covariance for simulations, or None.
        dt: Simulation step, or None.
        paths: Monte Carlo path count, or None.
        seed: Seed, or None.
    """

    system: ControlAffineSystem
    biaffine: BiaffineSystem | None = None
    points: tuple[tuple[sp.Rational, ...], ...] = ()
    states: tuple[StatePoint, ...] = ()
    control_values: tuple[tuple[sp.Rational, ...], ...] | None = None
    horizon: sp.Rational | None = None
    m0: tuple[sp.Rational, ...] | None = None
    P0: tuple[tuple[sp.Rational, ...], ...] | None = None
    dt: sp.Rational | None = None
    paths: int | None = None
    seed: int | None = None

    def control_signal(self, horizon: float | None = None) -> ControlSignal:
        """The file's control, or zeros on one segment when it has none."""
        t = horizon if horizon is not None else (float(self.horizon) if self.horizon else 1.0)
        if self.control_values is None:
            return ControlSignal.zeros(self.system.m_u, t)
        values = np.array([[float(v) for v in row] for row in self.control_values], dtype=float)
        return ControlSignal(values.reshape(len(self.control_values), self.system.m_u), t)


class _Reader:
    """Walks the decoded JSON, turning semantic problems into located errors."""

    def __init__(self, text: str) -> None:
        self.text = text

    def fail(self, path: str, message: str) -> SpecParseError:
        line, column = self._locate(path)
        return SpecParseError(f"{path}: {message}", line, column)

    def _locate(self, path: str) -> tuple[int, int]:
        keys = re.findall(r"[A-Za-z_][A-Za-z0-9_]*", path)
        for key in reversed(keys):
            idx = self.text.find(f'"{key}"')
            if idx >= 0:
                line = self.text.count("\n", 0, idx) + 1
                column = idx - (self.text.rfind("\n", 0, idx) + 1) + 1
                return line, column
        return 0, 0

    def integer(self, data: dict[str, Any], key: str, *, minimum: int) -> int:
        value = data.get(key)
        if not isinstance(value, int) or isinstance(value, bool):
            raise self.fail(key, "expected an integer")
        if value < minimum:
            raise self.fail(key, f"must be at least {minimum}, got {value}")
        return value

    def rational(self, value: Any, path: str) -> sp.Rational:
        if isinstance(value, bool) or not isinstance(value, int | str):
            raise self.fail(path, f"expected a rational string like \"1/2\", got {value!r}")
        try:
            return to_exact(value)
        except ValueError as exc:
            raise self.fail(path, str(exc)) from exc

    def array(self, value: Any, path: str, length: int | None = None) -> list[Any]:
        if not isinstance(value, list):
            raise self.fail(path, "expected a list")
        if length is not None and len(value) != length:
            raise self.fail(path, f"expected {length} entries, got {len(value)}")
        return value

    def vector(self, value: Any, path: str, n: int) -> tuple[sp.Rational, ...]:
        items = self.array(value, path, n)
        return tuple(self.rational(v, f"{path}[{i}]") for i, v in enumerate(items))

    def matrix(self, value: Any, path: str, rows: int, cols: int) -> tuple[tuple[sp.Rational, ...], ...]:
        items = self.array(value, path, rows)
        return tuple(self.vector(r, f"{path}[{i}]", cols) for i, r in enumerate(items))

    def polynomial(self, value: Any, path: str, n: int) -> Polynomial:
        terms = []
        for k, term in enumerate(self.array(value, path)):
            where = f"{path}[{k}]"
            if not isinstance(term, dict) or set(term) != {"exponents", "coeff"}:
                raise self.fail(where, 'each term needs exactly "exponents" and "coeff"')
            exponents = self.array(term["exponents"], f"{where}.exponents", n)
            if any(not isinstance(e, int) or isinstance(e, bool) or e < 0 for e in exponents):
                raise self.fail(f"{where}.exponents", "exponents must be non-negative integers")
            terms.append((exponents, self.rational(term["coeff"], f"{where}.coeff")))
        return Polynomial.from_terms(n, terms)


def _positive_definite(p: tuple[tuple[sp.Rational, ...], ...]) -> bool:
    return bool(sp.Matrix(p).is_positive_definite)


def _parse_fields(reader: _Reader, data: dict[str, Any], n: int, m_u: int) -> list[PolyVectorField]:
    raw = reader.array(data["drift"], "drift", m_u + 1)
    fields = []
    for k, field_terms in enumerate(raw):
        comps = reader.array(field_terms, f"drift[{k}]", n)
        fields.append(
            PolyVectorField(
                tuple(reader.polynomial(c, f"drift[{k}][{i}]", n) for i, c in enumerate(comps))
            )
        )
    return fields


def _parse_diffusion(reader: _Reader, data: dict[str, Any], n: int, d: int) -> PolyMatrixMap:
    rows = reader.array(data["diffusion"], "diffusion", n)
    entries = []
    for i, row in enumerate(rows):
        cells = reader.array(row, f"diffusion[{i}]", d)
        entries += [reader.polynomial(c, f"diffusion[{i}][{j}]", n) for j, c in enumerate(cells)]
    return PolyMatrixMap(n, d, tuple(entries))


def _parse_biaffine(reader: _Reader, raw: Any, n: int, m_u: int, d: int) -> BiaffineSystem:
    if not isinstance(raw, dict) or set(raw) != {"A", "g"}:
        raise reader.fail("biaffine", 'expected an object with "A" and "g"')
    mats = reader.array(raw["A"], "biaffine.A", m_u + 1)
    matrices = tuple(
        np.array(reader.matrix(a, f"biaffine.A[{k}]", n, n), dtype=object)
        for k, a in enumerate(mats)
    )
    g = np.array(reader.matrix(raw["g"], "biaffine.g", n, d), dtype=object)
    return BiaffineSystem(matrices, g)


def _parse_simulation(
    reader: _Reader, raw: Any, n: int
) -> tuple[Any, Any, sp.Rational | None, int | None]:
    if not isinstance(raw, dict):
        raise reader.fail("simulation", "expected an object")
    unknown = set(raw) - {"m0", "P0", "dt", "paths"}
    if unknown:
        raise reader.fail("simulation", f"unknown keys {sorted(unknown)}")
    m0 = reader.vector(raw["m0"], "simulation.m0", n) if "m0" in raw else None
    p0 = reader.matrix(raw["P0"], "simulation.P0", n, n) if "P0" in raw else None
    if p0 is not None and (sp.Matrix(p0) != sp.Matrix(p0).T or not _positive_definite(p0)):
        raise reader.fail("simulation.P0", "must be symmetric positive definite")
    dt = reader.rational(raw["dt"], "simulation.dt") if "dt" in raw else None
    if dt is not None and dt <= 0:
        raise reader.fail("simulation.dt", "must be positive")
    paths = reader.integer(raw, "paths", minimum=2) if "paths" in raw else None
    return m0, p0, dt, paths


_KNOWN_KEYS = {
    "schema", "n", "m_u", "d", "drift", "diffusion", "biaffine", "points", "states",
    "control", "simulation", "seed",
}


def parse_spec(text: str) -> SystemSpec:
    """Parse a specification from JSON text.

    Args:
        text: File contents.

    Returns:
        The parsed specification.

    Raises:
        SpecParseError: On malformed JSON or invalid content.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    reader = _Reader(text)
    if not isinstance(data, dict):
        raise SpecParseError("top level must be a JSON object", 1, 1)
    unknown = set(data) - _KNOWN_KEYS
    if unknown:
        raise reader.fail(sorted(unknown)[0], "unknown key")
    if data.get("schema") != SCHEMA_VERSION:
        raise reader.fail("schema", f"unsupported schema {data.get('schema')!r}, expected 1")

    n = reader.integer(data, "n", minimum=1)
    m_u = reader.integer(data, "m_u", minimum=0)
    d = reader.integer(data, "d", minimum=1)

    biaffine = None
    if "biaffine" in data:
        biaffine = _parse_biaffine(reader, data["biaffine"], n, m_u, d)

    if "drift" in data:
        fields = _parse_fields(reader, data, n, m_u)
        if "diffusion" not in data:
            raise reader.fail("diffusion", "missing diffusion")
        diffusion = _parse_diffusion(reader, data, n, d)
        system = ControlAffineSystem(tuple(fields), diffusion)
    elif biaffine is not None:
        system = biaffine.to_control_affine()
    else:
        raise reader.fail("drift", 'either "drift" and "diffusion" or "biaffine" is required')

    points: tuple[tuple[sp.Rational, ...], ...] = ()
    if "points" in data:
        raw_points = reader.array(data["points"], "points")
        points = tuple(reader.vector(p, f"points[{i}]", n) for i, p in enumerate(raw_points))

    states: list[StatePoint] = []
    if "states" in data:
        for i, raw in enumerate(reader.array(data["states"], "states")):
            if not isinstance(raw, dict) or set(raw) != {"m", "P"}:
                raise reader.fail(f"states[{i}]", 'expected an object with "m" and "P"')
            m = reader.vector(raw["m"], f"states[{i}].m", n)
            p = reader.matrix(raw["P"], f"states[{i}].P", n, n)
            if sp.Matrix(p) != sp.Matrix(p).T or not _positive_definite(p):
                raise reader.fail(f"states[{i}].P", "must be symmetric positive definite")
            states.append(StatePoint(np.array(m, dtype=object), np.array(p, dtype=object)))

    control_values = horizon = None
    if "control" in data:
        raw = data["control"]
        if not isinstance(raw, dict) or set(raw) != {"values", "horizon"}:
            raise reader.fail("control", 'expected an object with "values" and "horizon"')
        rows = reader.array(raw["values"], "control.values")
        if not rows:
            raise reader.fail("control.values", "needs at least one segment")
        control_values = tuple(
            reader.vector(r, f"control.values[{i}]", m_u) for i, r in enumerate(rows)
        )
        horizon = reader.rational(raw["horizon"], "control.horizon")
        if horizon <= 0:
            raise reader.fail("control.horizon", "must be positive")

    m0 = p0 = dt = paths = None
    if "simulation" in data:
        m0, p0, dt, paths = _parse_simulation(reader, data["simulation"], n)

    seed = None
    if "seed" in data:
        seed = reader.integer(data, "seed", minimum=0)

    return SystemSpec(
        system=system,
        biaffine=biaffine,
        points=points,
        states=tuple(states),
        control_values=control_values,
        horizon=horizon,
        m0=m0,
        P0=p0,
        dt=dt,
        paths=paths,
        seed=seed,
    )


def load_spec(path: Path) -> SystemSpec:
    """Read and parse a specification file.

    Raises:
        OSError: If the file cannot be read.
        SpecParseError: On invalid content.
    """
    return parse_spec(path.read_text(encoding="utf-8"))


def _terms(p: Polynomial) -> list[dict[str, Any]]:
    return [{"exponents": list(e), "coeff": str(c)} for e, c in p.terms]


def _strings(values: Any) -> Any:
    if isinstance(values, tuple | list | np.ndarray):
        return [_strings(v) for v in values]
    return str(values)


def serialize_spec(spec: SystemSpec) -> dict[str, Any]:
    """Canonical JSON-compatible form; terms in graded-lex order."""
    system = spec.system
    out: dict[str, Any] = {
        "schema": SCHEMA_VERSION,
        "n": system.n,
        "m_u": system.m_u,
        "d": system.d,
        "drift": [[_terms(c) for c in f.components] for f in system.fields],
        "diffusion": [
            [_terms(system.diffusion.entry(i, j)) for j in range(system.d)]
            for i in range(system.n)
        ],
    }
    if spec.biaffine is not None:
        out["biaffine"] = {
            "A": [_strings(a) for a in spec.biaffine.matrices],
            "g": _strings(spec.biaffine.g),
        }
    if spec.points:
        out["points"] = _strings(spec.points)
    if spec.states:
        out["states"] = [s.to_dict() for s in spec.states]
    if spec.control_values is not None:
        out["control"] = {"values": _strings(spec.control_values), "horizon": str(spec.horizon)}
    simulation: dict[str, Any] = {}
    if spec.m0 is not None:
        simulation["m0"] = _strings(spec.m0)
    if spec.P0 is not None:
        simulation["P0"] = _strings(spec.P0)
    if spec.dt is not None:
        simulation["dt"] = str(spec.dt)
    if spec.paths is not None:
        simulation["paths"] = spec.paths
    if simulation:
        out["simulation"] = simulation
    if spec.seed is not None:
        out["seed"] = spec.seed
    return out


def dumps_spec(spec: SystemSpec) -> str:
    return json.dumps(serialize_spec(spec), indent=2) + "\n"
