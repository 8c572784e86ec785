"""Vector fields on mean/covariance space in canonical ``(f, B)`` form.

A lifted field acts on ``X = (m, P)`` as
``(f(m), Df(m) P + P Df(m)^T + B(m))`` with ``B`` symmetric. The drift of the
statistical linearization carries ``B = g g^T``; control fields carry ``B = 0``.
Brackets of lifted fields stay in this form, with the ``f``-part given by the
flat bracket.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import sympy as sp

from statlin_access.vf_algebra import (
    DimensionError,
    Polynomial,
    PolyMatrixMap,
    PolyVectorField,
    as_matrix,
    as_vector,
    eval_field,
    jacobian,
    lie_bracket,
)


class NotSymmetricError(ValueError):
    """Raised when a matrix that must be symmetric is not."""


class NotPositiveDefiniteError(ValueError):
    """Raised when a covariance matrix is not positive definite."""


def lifted_dimension(n: int) -> int:
    """Dimension ``N = n + n(n+1)/2`` of R^n x Sym(n)."""
    return n + n * (n + 1) // 2


def upper_indices(n: int) -> list[tuple[int, int]]:
    """Upper-triangle index pairs ``(i, j)``, ``i <= j``, in row order."""
    return [(i, j) for i in range(n) for j in range(i, n)]


def _symmetric_from_upper(upper: Sequence[Polynomial], n: int) -> PolyMatrixMap:
    by_index = dict(zip(upper_indices(n), upper))
    return PolyMatrixMap(
        n, n, tuple(by_index[(min(i, j), max(i, j))] for i in range(n) for j in range(n))
    )


@dataclass(frozen=True)
class LiftedField:
    """Vector field ``(f, B)`` on ``M x Sym+(n)``.

    Attributes:
        f: Mean part, a polynomial vector field on R^n.
        upper: Upper triangle of the symmetric map ``B``, row order. Storing
            only the triangle makes symmetry structural.
    """

    f: PolyVectorField
    upper: tuple[Polynomial, ...]

    def __post_init__(self) -> None:
        n = self.f.dim
        expected = n * (n + 1) // 2
        if len(self.upper) != expected:
            raise DimensionError(
                f"B triangle has {len(self.upper)} entries, expected {expected} for n={n}"
            )
        if any(p.num_vars != n for p in self.upper):
            raise DimensionError(f"B entries must be polynomials in {n} variables")

    @classmethod
    def from_matrix(cls, f: PolyVectorField, b: PolyMatrixMap) -> LiftedField:
        """Build from a full symmetric matrix map.

        Raises:
            DimensionError: If ``b`` is not ``n x n``.
            NotSymmetricError: If ``b`` is not symmetric.
        """
        if (b.rows, b.cols) != (f.dim, f.dim):
            raise DimensionError(
                f"B is {b.rows}x{b.cols}, expected {f.dim}x{f.dim}"
            )
        if not b.is_symmetric():
            raise NotSymmetricError("B map must be symmetric")
        return cls(f, tuple(b.entry(i, j) for i, j in upper_indices(f.dim)))

    @classmethod
    def flat(cls, f: PolyVectorField) -> LiftedField:
        """Lift with ``B = 0``."""
        n = f.dim
        return cls(f, tuple(Polynomial.zero(n) for _ in range(n * (n + 1) // 2)))

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def B(self) -> PolyMatrixMap:  # noqa: N802
        return _symmetric_from_upper(self.upper, self.f.dim)

    @property
    def is_b_free(self) -> bool:
        return all(p.is_zero for p in self.upper)

    @property
    def is_zero(self) -> bool:
        return self.f.is_zero and self.is_b_free


@dataclass(frozen=True, eq=False)
class StatePoint:
    """Point ``X = (m, P)`` of the lifted state space.

    Exact (rational) entries stay exact; anything else is stored as float64.
    """

    m: np.ndarray
    P: np.ndarray

    def __post_init__(self) -> None:
        m = as_vector(self.m)
        p = as_matrix(self.P)
        if p.shape != (m.size, m.size):
            raise DimensionError(f"P has shape {p.shape}, expected ({m.size}, {m.size})")
        if not _is_symmetric(p):
            raise NotSymmetricError("P must be symmetric")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "P", p)

    @classmethod
    def identity(cls, m: Sequence[Any] | np.ndarray) -> StatePoint:
        """``(m, I)`` with an exact identity when ``m`` is exact."""
        vec = as_vector(m)
        if vec.dtype == object:
            eye = np.array(
                [[sp.Integer(int(i == j)) for j in range(vec.size)] for i in range(vec.size)],
                dtype=object,
            )
        else:
            eye = np.eye(vec.size)
        return cls(vec, eye)

    @property
    def dim(self) -> int:
        return int(self.m.size)

    @property
    def is_exact(self) -> bool:
        return self.m.dtype == object and self.P.dtype == object

    def is_positive_definite(self) -> bool:
        if self.P.dtype == object:
            return bool(sp.Matrix(self.P.tolist()).is_positive_definite)
        return bool(np.linalg.eigvalsh(self.P).min() > 0)

    def require_positive_definite(self) -> None:
        """Raise :class:`NotPositiveDefiniteError` unless ``P`` is PD."""
        if not self.is_positive_definite():
            raise NotPositiveDefiniteError(f"P is not positive definite: {self.P.tolist()}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "m": [_fmt(v) for v in self.m],
            "P": [[_fmt(v) for v in row] for row in self.P],
        }


@dataclass(frozen=True, eq=False)
class TangentValue:
    """Tangent vector ``(v, Q)`` with ``Q`` symmetric."""

    v: np.ndarray
    Q: np.ndarray

    def __post_init__(self) -> None:
        if self.Q.shape != (self.v.size, self.v.size):
            raise DimensionError(
                f"Q has shape {self.Q.shape}, expected ({self.v.size}, {self.v.size})"
            )


def _fmt(value: Any) -> str | float:
    if isinstance(value, sp.Rational):
        return str(value)
    return float(value)


def _is_symmetric(a: np.ndarray) -> bool:
    if a.dtype == object:
        return bool(np.all(a == a.T))
    return bool(np.allclose(a, a.T, rtol=1e-12, atol=1e-12))


def lift_drift(f0: PolyVectorField, g: PolyMatrixMap) -> LiftedField:
    """Lift the drift with diffusion ``g``: ``B(m) = g(m) g(m)^T``.

    Args:
        f0: Drift vector field on R^n.
        g: Diffusion map with ``n`` rows and ``d`` columns.

    Returns:
        The lifted drift.

    Raises:
        DimensionError: If ``g`` does not have ``n`` rows or uses another
            number of variables.
    """
    if g.rows != f0.dim or g.num_vars != f0.dim:
        raise DimensionError(
            f"diffusion is {g.rows}x{g.cols} in {g.num_vars} variables, "
            f"drift has dimension {f0.dim}"
        )
    return LiftedField.from_matrix(f0, g @ g.T)


def lift_control(fi: PolyVectorField) -> LiftedField:
    return LiftedField.flat(fi)


def lifted_bracket(F1: LiftedField, F2: LiftedField) -> LiftedField:  # noqa: N803
    """Bracket ``[F1, F2] = dF2 . F1 - dF1 . F2`` in ``(f, B)`` form.

    The ``B``-part is
    ``dB2.f1 - dB1.f2 + Df2 B1 - Df1 B2 + B1 Df2^T - B2 Df1^T``.

    Raises:
        DimensionError: If the fields live on different spaces.
    """
    if F1.dim != F2.dim:
        raise DimensionError(f"lifted fields of dimension {F1.dim} and {F2.dim}")
    f12 = lie_bracket(F1.f, F2.f)
    if F1.is_b_free and F2.is_b_free:
        return LiftedField.flat(f12)
    b1, b2 = F1.B, F2.B
    df1, df2 = jacobian(F1.f), jacobian(F2.f)
    b12 = (
        b2.directional_derivative(F1.f)
        - b1.directional_derivative(F2.f)
        + df2 @ b1
        - df1 @ b2
        + b1 @ df2.T
        - b2 @ df1.T
    )
    return LiftedField.from_matrix(f12, b12)


def eval_lifted(F: LiftedField, X: StatePoint) -> TangentValue:  # noqa: N803
    """Evaluate a lifted field at ``X = (m, P)``.

    Exact when both ``F`` coefficients and ``X`` are rational.

    Raises:
        DimensionError: If ``X`` lives in another dimension.
    """
    if X.dim != F.dim:
        raise DimensionError(f"state of dimension {X.dim} for a field of dimension {F.dim}")
    exact = X.is_exact
    m = X.m
    P = X.P if exact else np.asarray(X.P, dtype=float)
    if not exact:
        m = np.asarray(m, dtype=float)
    v = eval_field(F.f, m)
    df = jacobian(F.f).evaluate(m)
    q = df @ P + P @ df.T + F.B.evaluate(m)
    return TangentValue(v, q)


def phi_P(v: Sequence[Any] | np.ndarray, A: np.ndarray, P: np.ndarray) -> TangentValue:  # noqa: N802, N803
    """The map ``(v, A) -> (v, A P + P A^T)``.

    Raises:
        NotPositiveDefiniteError: If ``P`` is not positive definite.
        DimensionError: If shapes disagree.
    """
    state = StatePoint(as_vector(v), P)
    state.require_positive_definite()
    a = as_matrix(A)
    if a.shape != state.P.shape:
        raise DimensionError(f"A has shape {a.shape}, expected {state.P.shape}")
    return TangentValue(state.m, a @ state.P + state.P @ a.T)


def vectorize(t: TangentValue) -> np.ndarray:
    """Flatten ``(v, Q)`` to R^N: ``v`` then the upper triangle of ``Q`` in row order.

    Off-diagonal entries are not rescaled; ranks do not depend on it.
    """
    n = t.v.size
    tri = [t.Q[i, j] for i, j in upper_indices(n)]
    dtype = object if t.v.dtype == object and t.Q.dtype == object else float
    return np.array(list(t.v) + tri, dtype=dtype)


def unvectorize(vec: Sequence[Any] | np.ndarray, n: int) -> TangentValue:
    """Inverse of :func:`vectorize`.

    Raises:
        DimensionError: If ``len(vec) != N``.
    """
    arr = np.asarray(vec)
    if arr.size != lifted_dimension(n):
        raise DimensionError(f"vector of length {arr.size}, expected {lifted_dimension(n)}")
    q = np.zeros((n, n), dtype=arr.dtype)
    for k, (i, j) in enumerate(upper_indices(n)):
        q[i, j] = q[j, i] = arr[n + k]
    return TangentValue(arr[:n].copy(), q)


def random_state(
    rng: np.random.Generator,
    n: int,
    *,
    denominator: int = 10,
    spread: int = 20,
    epsilon: sp.Rational = sp.Rational(1, 10),
) -> StatePoint:
    """Draw an exact rational state with ``P = L L^T + epsilon I``.

    Args:
        rng: Random generator.
        n: State dimension.
        denominator: Common denominator of the drawn entries.
        spread: Numerators are drawn uniformly from ``[-spread, spread]``.
        epsilon: Diagonal shift that keeps ``P`` positive definite.

    Returns:
        A positive definite rational state.
    """

    def draw() -> sp.Rational:
        return sp.Rational(int(rng.integers(-spread, spread + 1)), denominator)

    m = np.array([draw() for _ in range(n)], dtype=object)
    lower = np.array(
        [[draw() if j <= i else sp.Integer(0) for j in range(n)] for i in range(n)],
        dtype=object,
    )
    p = lower @ lower.T
    for i in range(n):
        p[i, i] += epsilon
    return StatePoint(m, p)
