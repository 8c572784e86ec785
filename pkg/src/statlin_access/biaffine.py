"""Biaffine systems: linear drift fields ``f_i(x) = A_i x`` and constant diffusion.

For these systems every bracket of lifted fields is affine in ``(m, P)`` and has
a closed form, which gives a ceiling on the flat rank conditions (they always
fail) and a sufficient test for fixed-time accessibility of the lifted system
with diffusion.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import sympy as sp

from statlin_access.lift import (
    StatePoint,
    TangentValue,
    eval_lifted,
    lift_control,
    lift_drift,
    lifted_bracket,
    random_state,
    vectorize,
)
from statlin_access.models import BiaffineReport
from statlin_access.rank_engine import DEFAULT_TOL, check_rank_at_state, numerical_rank
from statlin_access.systems import ControlAffineSystem
from statlin_access.vf_algebra import DimensionError, PolyMatrixMap, PolyVectorField, as_matrix

logger = logging.getLogger(__name__)

CONCLUSION_ACCESSIBLE = "accessible in fixed time on an open dense set"
CONCLUSION_NONE = "no conclusion"


def _exact_matrix(values: Any, what: str) -> np.ndarray:
    a = as_matrix(values)
    if a.dtype != object:
        raise ValueError(f"{what} must have rational entries")
    return a


@dataclass(frozen=True, eq=False)
class BiaffineSystem:
    """Biaffine system ``dx = (A0 x + sum_i u_i A_i x) dt + g dW``.

    Attributes:
        matrices: ``A0 … A_{m_u}``, each ``n x n`` with rational entries.
        g: Constant ``n x d`` diffusion matrix with rational entries.
    """

    matrices: tuple[np.ndarray, ...]
    g: np.ndarray

    def __post_init__(self) -> None:
        if not self.matrices:
            raise DimensionError("a biaffine system needs at least the drift matrix A0")
        mats = tuple(_exact_matrix(a, f"A{k}") for k, a in enumerate(self.matrices))
        n = mats[0].shape[0]
        for k, a in enumerate(mats):
            if a.shape != (n, n):
                raise DimensionError(f"A{k} has shape {a.shape}, expected ({n}, {n})")
        g = _exact_matrix(self.g, "g")
        if g.shape[0] != n:
            raise DimensionError(f"g has {g.shape[0]} rows, expected {n}")
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "g", g)

    @property
    def n(self) -> int:
        return int(self.matrices[0].shape[0])

    @property
    def m_u(self) -> int:
        return len(self.matrices) - 1

    @property
    def d(self) -> int:
        return int(self.g.shape[1])

    def to_control_affine(self) -> ControlAffineSystem:
        return ControlAffineSystem(
            tuple(PolyVectorField.linear(a) for a in self.matrices),
            PolyMatrixMap.constant(self.g, self.n),
        )


@dataclass(frozen=True, eq=False)
class Certificate:
    """Witness state where the bracket ``[F0, F_i]`` leaves the biaffine ceiling."""

    index: int
    state: StatePoint
    alpha: Any

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "m": self.state.to_dict()["m"],
            "P": self.state.to_dict()["P"],
            "alpha": str(self.alpha) if isinstance(self.alpha, sp.Rational) else float(self.alpha),
        }


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def matrix_lie_dim(matrices: Sequence[Any]) -> tuple[int, list[np.ndarray]]:
    """Dimension and a basis of the matrix Lie algebra generated by ``matrices``.

    Args:
        matrices: One or more square matrices of equal size.

    Returns:
        ``(dimension, basis)``; the dimension is at most ``n^2``.

    Raises:
        ValueError: If no matrices are given.
        DimensionError: If the matrices are not square of one size.
    """
    if not matrices:
        raise ValueError("matrix_lie_dim needs at least one matrix")
    mats = [as_matrix(a) for a in matrices]
    n = mats[0].shape[0]
    if any(a.shape != (n, n) for a in mats):
        raise DimensionError("generators must be square matrices of one size")

    basis: list[np.ndarray] = []

    def adds(candidate: np.ndarray) -> bool:
        vectors = [b.reshape(-1) for b in basis]
        return numerical_rank([*vectors, candidate.reshape(-1)]) > len(basis)

    for a in mats:
        if adds(a):
            basis.append(a)
    pending = [(i, j) for j in range(len(basis)) for i in range(j)]
    while pending:
        i, j = pending.pop(0)
        c = _commutator(basis[i], basis[j])
        if adds(c):
            basis.append(c)
            new = len(basis) - 1
            pending += [(k, new) for k in range(new)]
    return len(basis), basis


def b0j(a_j: Any, g: Any) -> np.ndarray:
    """``A_j g g^T + g g^T A_j^T``, the constant ``B``-part of ``[F0, F_j]``."""
    a = as_matrix(a_j)
    gm = as_matrix(g)
    if a.shape != (gm.shape[0], gm.shape[0]):
        raise DimensionError(f"A has shape {a.shape} but g has {gm.shape[0]} rows")
    gg = gm @ gm.T
    return a @ gg + gg @ a.T


def _unit(n: int, i: int, j: int, exact: bool) -> np.ndarray:
    if exact:
        e = np.array([[sp.Integer(0)] * n for _ in range(n)], dtype=object)
        e[i, j] = sp.Integer(1)
        return e
    e = np.zeros((n, n))
    e[i, j] = 1.0
    return e


def psi_rank(m: Sequence[Any], P: Any, tol: float = DEFAULT_TOL) -> int:  # noqa: N803
    """Rank of ``A -> (A m, A P + P A^T)`` over all ``n x n`` matrices ``A``.

    Raises:
        NotPositiveDefiniteError: If ``P`` is not positive definite.
    """
    state = StatePoint(m, P)
    state.require_positive_definite()
    n = state.dim
    images = []
    for i in range(n):
        for j in range(n):
            e = _unit(n, i, j, state.is_exact)
            images.append(vectorize(TangentValue(e @ state.m, e @ state.P + state.P @ e.T)))
    return numerical_rank(images, tol)


def biaffine_bracket(sys: BiaffineSystem, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed form of ``[F_i, F_j]`` as ``(C, B)``.

    The bracket acts as ``(m, P) -> (C m, C P + P C^T + B)`` with
    ``C = A_j A_i - A_i A_j``; ``B`` is ``B_0j`` for ``i = 0``, ``-B_0i`` for
    ``j = 0`` and zero otherwise.
    """
    mats = sys.matrices
    if not (0 <= i < len(mats) and 0 <= j < len(mats)):
        raise ValueError(f"field indices must lie in 0..{sys.m_u}, got ({i}, {j})")
    c = mats[j] @ mats[i] - mats[i] @ mats[j]
    zero = np.array([[sp.Integer(0)] * sys.n for _ in range(sys.n)], dtype=object)
    if i == j:
        return c, zero
    if i == 0:
        return c, b0j(mats[j], sys.g)
    if j == 0:
        return c, -b0j(mats[i], sys.g)
    return c, zero


def _inverse(P: np.ndarray) -> np.ndarray:  # noqa: N803
    if P.dtype == object:
        return np.array(sp.Matrix(P.tolist()).inv().tolist(), dtype=object)
    return np.linalg.inv(P)


def alpha_witness(m: Sequence[Any], P: Any, a0: Any, a_i: Any, g: Any) -> Any:  # noqa: N803
    """Evaluate ``alpha(v, Q) = m^T P^-1 (v - Q P^-1 m / 2)`` on ``[F0, F_i](m, P)``.

    The functional vanishes on every bracket image of a biaffine system except
    through the ``B_0i`` term, where it equals ``-m^T P^-1 B_0i P^-1 m / 2``; a
    nonzero value shows the ideal is not confined to the biaffine ceiling.

    Args:
        m: Mean vector.
        P: Positive definite covariance.
        a0: Drift matrix (rational).
        a_i: Control matrix (rational).
        g: Diffusion matrix (rational).

    Returns:
        Exact rational when ``m`` and ``P`` are rational, else a float.

    Raises:
        NotPositiveDefiniteError: If ``P`` is not positive definite.
    """
    state = StatePoint(m, P)
    state.require_positive_definite()
    f0 = lift_drift(
        PolyVectorField.linear(_exact_matrix(a0, "A0")),
        PolyMatrixMap.constant(_exact_matrix(g, "g"), state.dim),
    )
    fi = lift_control(PolyVectorField.linear(_exact_matrix(a_i, "A_i")))
    t = eval_lifted(lifted_bracket(f0, fi), state)
    p_inv = _inverse(state.P)
    half = sp.Rational(1, 2) if state.is_exact else 0.5
    x = p_inv @ state.m
    return state.m @ (p_inv @ (t.v - half * (t.Q @ x)))


def find_certificate(
    sys: BiaffineSystem, rng: np.random.Generator, retries: int = 50
) -> Certificate | None:
    """Search random rational states for ``m^T P^-1 B_0i P^-1 m != 0``.

    Args:
        sys: Biaffine system.
        rng: Random generator.
        retries: Random states to try.

    Returns:
        The first certificate found, or None if every ``B_0i`` vanishes or the
        retries run out.
    """
    b0 = {i: b0j(sys.matrices[i], sys.g) for i in range(1, sys.m_u + 1)}
    candidates = [i for i, b in b0.items() if any(v != 0 for v in b.reshape(-1))]
    if not candidates:
        return None
    for _ in range(retries):
        state = random_state(rng, sys.n)
        x = _inverse(state.P) @ state.m
        for i in candidates:
            if x @ (b0[i] @ x) != 0:
                alpha = alpha_witness(state.m, state.P, sys.matrices[0], sys.matrices[i], sys.g)
                return Certificate(i, state, alpha)
    logger.warning("No certificate found after %d random states", retries)
    return None


def check_prop213(
    sys: BiaffineSystem,
    samples: int = 100,
    tol: float = DEFAULT_TOL,
    *,
    seed: int = 0,
    depth_cap: int | None = None,
    retries: int = 50,
) -> BiaffineReport:
    """Sufficient test for fixed-time accessibility of a biaffine lifted system.

    Hypotheses: the control matrices generate ``gl(n)``, and some ``B_0i`` is
    nonzero. When both hold the lifted system satisfies the fixed-time rank
    condition on an open dense set; the report adds a witness state and the
    direct rank check at ``samples`` random states as evidence.

    Args:
        sys: Biaffine system.
        samples: Random states for the direct rank check, at least 1.
        tol: Relative threshold for float ranks.
        seed: Seed for the witness search and the sampled states.
        depth_cap: Bracket depth cap for the direct check.
        retries: Witness search budget.

    Raises:
        ValueError: If ``samples < 1``.
    """
    if samples < 1:
        raise ValueError(f"samples must be at least 1, got {samples}")
    controls = sys.matrices[1:]
    lie_dim = matrix_lie_dim(controls)[0] if controls else 0
    hyp_i = lie_dim == sys.n**2
    b0 = [b0j(a, sys.g) for a in controls]
    hyp_ii = any(any(v != 0 for v in b.reshape(-1)) for b in b0)
    logger.info("Biaffine hypotheses: lie dim %d/%d, B0 nonzero=%s", lie_dim, sys.n**2, hyp_ii)

    certificate = None
    if hyp_ii:
        certificate = find_certificate(sys, np.random.default_rng(seed), retries)

    rank_report = None
    if hyp_i and hyp_ii:
        rank_report = check_rank_at_state(
            sys.to_control_affine(), [], depth_cap, tol, samples=samples, seed=seed
        )

    return BiaffineReport(
        n=sys.n,
        m_u=sys.m_u,
        lie_dim=lie_dim,
        hypothesis_i=hyp_i,
        hypothesis_ii=hyp_ii,
        b0=[[[str(v) for v in row] for row in b] for b in b0],
        certificate=None if certificate is None else certificate.to_dict(),
        conclusion=CONCLUSION_ACCESSIBLE if hyp_i and hyp_ii else CONCLUSION_NONE,
        samples=samples,
        seed=seed,
        rank_report=rank_report,
    )
