"""Bracket saturation and the accessibility rank conditions.

Families of lifted fields are closed under brackets breadth-first by bracket
depth. A new bracket is kept only if it raises the rank of the family evaluated
at the probe states (the check points plus a few random rational auxiliary
states), so the retained elements stay small while still spanning what the full
Lie algebra spans at those states.

Verdicts are honest about sampling: ``pass`` when the rank at a point reaches the
target, ``fail`` when it does not and the retained family was closed under
brackets before the depth cap, ``inconclusive-at-cap`` otherwise.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, TypeAlias

import numpy as np
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from statlin_access.config import resolve_depth_cap
from statlin_access.lift import (
    LiftedField,
    StatePoint,
    eval_lifted,
    lifted_bracket,
    lifted_dimension,
    random_state,
    vectorize,
)
from statlin_access.models import Condition, RankReport, Verdict
from statlin_access.systems import ControlAffineSystem
from statlin_access.vf_algebra import DimensionError, PolyVectorField, is_exact, to_exact

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8

# Nested pairs of generator names, e.g. ("f0", ("f0", "f1")) for [f0,[f0,f1]].
Provenance: TypeAlias = "str | tuple[Provenance, Provenance]"


class BracketMode(StrEnum):
    """Which family a saturation builds.

    ``full_lie`` closes every generator under brackets. ``zero_time_ideal``
    starts from the control fields and brackets with the drift (``ad^s f0 . fi``)
    and among retained elements. ``control_only`` ignores the drift.
    """

    FULL_LIE = "full_lie"
    ZERO_TIME_IDEAL = "zero_time_ideal"
    CONTROL_ONLY = "control_only"


def format_provenance(p: Provenance) -> str:
    if isinstance(p, str):
        return p
    return f"[{format_provenance(p[0])},{format_provenance(p[1])}]"


@dataclass(frozen=True)
class BasisElement:
    field: LiftedField
    provenance: Provenance
    depth: int

    @property
    def label(self) -> str:
        return format_provenance(self.provenance)


@dataclass
class BracketBasis:
    """Result of a saturation.

    Attributes:
        mode: Family that was built.
        depth_cap: Deepest bracket level allowed.
        dim: State dimension n.
        elements: Retained fields with provenance, in retention order.
        depth_used: Deepest level explored.
        closed: Every bracket among retained elements (and with the drift in
            ``zero_time_ideal`` mode) was tested.
        probe_ranks: Rank at each check point.
        exact: All ranks came from rational arithmetic.
    """

    mode: BracketMode
    depth_cap: int
    dim: int
    elements: list[BasisElement] = field(default_factory=list)
    depth_used: int = 1
    closed: bool = False
    probe_ranks: list[int] = field(default_factory=list)
    exact: bool = True

    @property
    def fields(self) -> list[LiftedField]:
        return [e.field for e in self.elements]

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.elements]


def _exact_rank(matrix: np.ndarray) -> int:
    rows, cols = matrix.shape
    dm = DomainMatrix(
        [[QQ.from_sympy(to_exact(v)) for v in row] for row in matrix], (rows, cols), QQ
    )
    return int(dm.rank())


def numerical_rank(vectors: Sequence[Any], tol: float = DEFAULT_TOL) -> int:
    """Rank of a list of vectors.

    Rational input goes through exact elimination over ``QQ``; anything else
    through an SVD, counting singular values above ``tol`` times the largest.

    Args:
        vectors: Vectors of a common length.
        tol: Relative singular-value threshold for the float path.

    Returns:
        The rank; 0 for an empty list.

    Raises:
        DimensionError: If the vectors have different lengths.
    """
    if len(vectors) == 0:
        return 0
    rows = [np.asarray(v, dtype=object).reshape(-1) for v in vectors]
    width = rows[0].size
    if any(r.size != width for r in rows):
        raise DimensionError("vectors of different lengths")
    if width == 0:
        return 0
    matrix = np.array(rows, dtype=object).reshape(len(rows), width)
    if all(is_exact(v) for v in matrix.reshape(-1)):
        return _exact_rank(matrix)
    values = np.asarray(matrix, dtype=float)
    s = np.linalg.svd(values, compute_uv=False)
    if s.size == 0 or not s[0] > 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def _evaluate(F: LiftedField, points: Sequence[StatePoint]) -> np.ndarray:  # noqa: N803
    parts = [vectorize(eval_lifted(F, X)) for X in points]
    dtype = object if all(p.dtype == object for p in parts) else float
    return np.concatenate([np.asarray(p, dtype=dtype) for p in parts])


def saturate(
    generators: Sequence[LiftedField | PolyVectorField],
    mode: BracketMode,
    depth_cap: int,
    probes: Sequence[StatePoint],
    *,
    aux_probes: Sequence[StatePoint] = (),
    target: int | None = None,
    tol: float = DEFAULT_TOL,
    names: Sequence[str] | None = None,
) -> BracketBasis:
    """Close a family under brackets, breadth-first by depth.

    Generators are the full family ``f0, f1, …``; the mode decides how ``f0`` is
    used. Depth of ``[a, b]`` is ``depth(a) + depth(b)``, and brackets with the
    drift in ``zero_time_ideal`` mode add one, so depth counts ``ad`` steps.

    Args:
        generators: ``f0`` followed by the control fields. Flat fields are
            lifted with ``B = 0``.
        mode: Which family to build.
        depth_cap: Deepest bracket level to explore, at least 1.
        probes: States at which the rank target must be met.
        aux_probes: Extra states used only for the retention test.
        target: Rank to reach at every probe; defaults to N.
        tol: Relative threshold for float ranks.
        names: Generator labels for provenance; defaults to ``f0, f1, …``.

    Returns:
        The saturated basis with per-probe ranks.

    Raises:
        ValueError: If ``depth_cap < 1`` or no generators or probes are given.
    """
    if depth_cap < 1:
        raise ValueError(f"depth_cap must be at least 1, got {depth_cap}")
    if not generators:
        raise ValueError("saturation needs at least one generator")
    if not probes:
        raise ValueError("saturation needs at least one probe state")

    lifted = [g if isinstance(g, LiftedField) else LiftedField.flat(g) for g in generators]
    labels = list(names) if names is not None else [f"f{k}" for k in range(len(lifted))]
    n = lifted[0].dim
    big_n = lifted_dimension(n)
    goal = big_n if target is None else target
    points = list(probes) + list(aux_probes)
    primary = len(probes)
    full_rank = big_n * len(points)

    drift: BasisElement | None = None
    if mode == BracketMode.FULL_LIE:
        seeds = list(zip(lifted, labels))
    else:
        seeds = list(zip(lifted[1:], labels[1:]))
        if mode == BracketMode.ZERO_TIME_IDEAL:
            drift = BasisElement(lifted[0], labels[0], 1)

    basis = BracketBasis(mode=mode, depth_cap=depth_cap, dim=n)
    rows: list[np.ndarray] = []
    stacked_rank = 0

    def consider(F: LiftedField, prov: Provenance, depth: int) -> bool:  # noqa: N803
        nonlocal stacked_rank
        label = format_provenance(prov)
        if F.is_zero:
            logger.debug("Dropped %s: identically zero", label)
            return False
        row = _evaluate(F, points)
        rank = numerical_rank([*rows, row], tol)
        if rank > stacked_rank:
            rows.append(row)
            stacked_rank = rank
            basis.elements.append(BasisElement(F, prov, depth))
            logger.debug("Retained %s at depth %d (stacked rank %d)", label, depth, rank)
            return True
        logger.debug("Dropped %s: no rank gain at probes", label)
        return False

    def probe_ranks() -> list[int]:
        return [
            numerical_rank([r[k * big_n : (k + 1) * big_n] for r in rows], tol)
            for k in range(primary)
        ]

    def reached(ranks: list[int]) -> bool:
        return all(r >= goal for r in ranks)

    for F, label in seeds:
        consider(F, label, 1)
    ranks = probe_ranks()

    tested: set[tuple[int, int]] = set()
    depth = 1
    while not reached(ranks):
        if stacked_rank >= full_rank:
            break
        k = len(basis.elements)
        possible = k * (k - 1) // 2 + (k if drift is not None else 0)
        if len(tested) >= possible:
            basis.closed = True
            break
        if depth + 1 > depth_cap:
            break
        depth += 1
        candidates = [
            (i, j)
            for j in range(k)
            for i in range(j)
            if basis.elements[i].depth + basis.elements[j].depth == depth
        ]
        if drift is not None:
            candidates += [(-1, j) for j in range(k) if basis.elements[j].depth + 1 == depth]
        for i, j in candidates:
            tested.add((i, j))
            left = drift if i < 0 else basis.elements[i]
            right = basis.elements[j]
            assert left is not None
            bracket = lifted_bracket(left.field, right.field)
            if consider(bracket, (left.provenance, right.provenance), depth):
                ranks = probe_ranks()
                if reached(ranks):
                    break

    basis.depth_used = depth
    basis.probe_ranks = ranks
    basis.exact = all(p.is_exact for p in points)
    logger.info(
        "Saturated %s: %d retained, depth %d/%d, closed=%s, ranks=%s",
        mode,
        len(basis.elements),
        depth,
        depth_cap,
        basis.closed,
        ranks,
    )
    return basis


def generic_rank(
    basis: BracketBasis,
    rng: np.random.Generator,
    *,
    flat: bool = False,
    tol: float = DEFAULT_TOL,
) -> int:
    """Rank of the retained family at a random rational point with large denominators.

    Stands in for the rank over the field of rational functions: a polynomial
    matrix has its generic rank outside a proper algebraic set, which a random
    high-precision rational point avoids with overwhelming probability.

    Args:
        basis: Saturated family.
        rng: Random generator.
        flat: Evaluate at ``(m, I)`` instead of a random ``(m, P)``.
        tol: Relative threshold for the float path.
    """
    scale = 10**12
    state = random_state(rng, basis.dim, denominator=scale, spread=scale)
    if flat:
        state = StatePoint.identity(state.m)
    return numerical_rank([vectorize(eval_lifted(F, state)) for F in basis.fields], tol)


def _verdicts(basis: BracketBasis, target: int) -> list[Verdict]:
    out = []
    for rank in basis.probe_ranks:
        if rank >= target:
            out.append(Verdict.PASS)
        elif basis.closed:
            out.append(Verdict.FAIL)
        else:
            out.append(Verdict.INCONCLUSIVE)
    return out


def _aux_states(n: int, count: int, seed: int, *, flat: bool) -> list[StatePoint]:
    rng = np.random.default_rng((seed, 1))
    states = [random_state(rng, n) for _ in range(count)]
    if flat:
        return [StatePoint.identity(s.m) for s in states]
    return states


def _build_report(
    condition: Condition,
    basis: BracketBasis,
    states: Sequence[StatePoint],
    *,
    tol: float,
    generic: bool,
    seed: int,
    flat: bool,
) -> RankReport:
    target = lifted_dimension(basis.dim)
    if flat:
        points = [{"m": s.to_dict()["m"]} for s in states]
    else:
        points = [s.to_dict() for s in states]
    report = RankReport(
        condition=condition,
        mode=str(basis.mode),
        target=target,
        points=points,
        ranks=list(basis.probe_ranks),
        verdicts=_verdicts(basis, target),
        depth_cap=basis.depth_cap,
        depth_used=basis.depth_used,
        closed=basis.closed,
        basis=basis.labels,
        tolerance=tol,
        exact=basis.exact,
    )
    if generic:
        report.generic_rank = generic_rank(
            basis, np.random.default_rng((seed, 3)), flat=flat, tol=tol
        )
    return report


def _check_flat(
    sys: ControlAffineSystem,
    points: Sequence[Sequence[Any]],
    condition: Condition,
    mode: BracketMode,
    depth_cap: int | None,
    tol: float,
    aux_probes: int,
    seed: int,
    generic: bool,
) -> RankReport:
    if not points:
        raise ValueError("at least one point is required")
    states = [StatePoint.identity(p) for p in points]
    for s in states:
        if s.dim != sys.n:
            raise DimensionError(f"point of dimension {s.dim} for a system of dimension {sys.n}")
    cap = resolve_depth_cap(depth_cap, sys.lifted_dim)
    basis = saturate(
        sys.flat_family(),
        mode,
        cap,
        states,
        aux_probes=_aux_states(sys.n, aux_probes, seed, flat=True),
        tol=tol,
    )
    return _build_report(condition, basis, states, tol=tol, generic=generic, seed=seed, flat=True)


def check_condition_1(
    sys: ControlAffineSystem,
    points: Sequence[Sequence[Any]],
    depth_cap: int | None = None,
    tol: float = DEFAULT_TOL,
    *,
    aux_probes: int = 3,
    seed: int = 0,
    generic: bool = False,
) -> RankReport:
    """Free-time condition: rank of ``(f(m), Df(m) + Df(m)^T)`` over the Lie algebra.

    Args:
        sys: System whose drift and control fields generate the algebra.
        points: Points ``m`` in R^n; rational entries give exact ranks.
        depth_cap: Bracket depth cap, default ``2N + 1``.
        tol: Relative threshold for float ranks.
        aux_probes: Random rational states added to the retention test.
        seed: Seed for auxiliary probes and the generic point.
        generic: Also report the rank at a random high-precision point.

    Returns:
        Per-point ranks and verdicts against ``N``.
    """
    return _check_flat(
        sys, points, Condition.COND1, BracketMode.FULL_LIE, depth_cap, tol, aux_probes, seed, generic
    )


def check_condition_2(
    sys: ControlAffineSystem,
    points: Sequence[Sequence[Any]],
    depth_cap: int | None = None,
    tol: float = DEFAULT_TOL,
    *,
    aux_probes: int = 3,
    seed: int = 0,
    generic: bool = False,
) -> RankReport:
    """Fixed-time condition: as :func:`check_condition_1` over the zero-time ideal."""
    return _check_flat(
        sys,
        points,
        Condition.COND2,
        BracketMode.ZERO_TIME_IDEAL,
        depth_cap,
        tol,
        aux_probes,
        seed,
        generic,
    )


def check_hormander_lifted(
    sys: ControlAffineSystem,
    points: Sequence[Sequence[Any]],
    depth_cap: int | None = None,
    tol: float = DEFAULT_TOL,
    *,
    aux_probes: int = 3,
    seed: int = 0,
    generic: bool = False,
) -> RankReport:
    """Controllability condition using the control fields only.

    A pass at every point of a connected domain makes the lifted system
    controllable there in free and fixed time.
    """
    return _check_flat(
        sys,
        points,
        Condition.HORMANDER,
        BracketMode.CONTROL_ONLY,
        depth_cap,
        tol,
        aux_probes,
        seed,
        generic,
    )


def check_rank_at_state(
    sys: ControlAffineSystem,
    states: StatePoint | Sequence[StatePoint],
    depth_cap: int | None = None,
    tol: float = DEFAULT_TOL,
    mode: BracketMode = BracketMode.ZERO_TIME_IDEAL,
    *,
    samples: int = 0,
    seed: int = 0,
    aux_probes: int = 3,
    generic: bool = False,
) -> RankReport:
    """Rank of the lifted family with diffusion, evaluated at states ``(m, P)``.

    Args:
        sys: System; the drift is lifted with ``B = g g^T``.
        states: One or more states with positive definite ``P``.
        depth_cap: Bracket depth cap, default ``2N + 1``.
        tol: Relative threshold for float ranks.
        mode: Family to saturate; the zero-time ideal by default.
        samples: Additional random rational states to check.
        seed: Seed for sampled, auxiliary and generic states.
        aux_probes: Random states added to the retention test.
        generic: Also report the rank at a random high-precision state.

    Returns:
        Per-state ranks and verdicts against ``N``.

    Raises:
        NotPositiveDefiniteError: If some ``P`` is not positive definite.
        ValueError: If no states are given and ``samples`` is 0.
    """
    checked = [states] if isinstance(states, StatePoint) else list(states)
    if samples:
        rng = np.random.default_rng((seed, 2))
        checked += [random_state(rng, sys.n) for _ in range(samples)]
    if not checked:
        raise ValueError("at least one state or a positive sample count is required")
    for s in checked:
        if s.dim != sys.n:
            raise DimensionError(f"state of dimension {s.dim} for a system of dimension {sys.n}")
        s.require_positive_definite()
    cap = resolve_depth_cap(depth_cap, sys.lifted_dim)
    basis = saturate(
        sys.lifted_family(),
        mode,
        cap,
        checked,
        aux_probes=_aux_states(sys.n, aux_probes, seed, flat=False),
        tol=tol,
    )
    return _build_report(
        Condition.LIFTED_AT_STATE, basis, checked, tol=tol, generic=generic, seed=seed, flat=False
    )
