"""Exact calculus for polynomial vector fields on R^n.

Polynomials carry rational coefficients (sympy ``Poly`` over ``QQ``) so that
Jacobians, Lie brackets and evaluations at rational points are exact. Every
value is immutable; numeric (numpy) evaluators are compiled lazily and cached on
the instance for the simulator.

Typical usage::

    from statlin_access.vf_algebra import PolyVectorField, lie_bracket

    f0 = PolyVectorField.from_exprs(["x1**2"])
    f1 = PolyVectorField.from_exprs(["1"])
    lie_bracket(f0, f1)          # -> (-2*x1)
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cache, cached_property
from numbers import Integral
from typing import Any

import numpy as np
import sympy as sp
from sympy import QQ, Poly

# Scalars accepted as exact: Python/numpy integers, Fractions and sympy Rationals.
ExactScalar = int | Fraction | sp.Rational


class DimensionError(ValueError):
    """Raised when operands live in spaces of different dimensions."""


@cache
def variables(num_vars: int) -> tuple[sp.Symbol, ...]:
    """Return the canonical generators ``x1 … xn`` for ``num_vars`` variables.

    Args:
        num_vars: Number of variables, at least 1.

    Returns:
        Tuple of sympy symbols.

    Raises:
        ValueError: If ``num_vars`` is not positive.
    """
    if num_vars < 1:
        raise ValueError(f"num_vars must be positive, got {num_vars}")
    return tuple(sp.symbols(f"x1:{num_vars + 1}"))


def is_exact(value: Any) -> bool:
    """Whether a scalar can enter the exact (rational) pipeline."""
    if isinstance(value, bool):
        return False
    return isinstance(value, Integral | Fraction | sp.Rational)


def to_exact(value: Any) -> sp.Rational:
    """Convert an exact scalar (or a ``"p/q"`` string) to a sympy Rational.

    Raises:
        ValueError: If the value is a float or cannot be parsed as a rational.
    """
    if isinstance(value, sp.Rational):
        return value
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    if isinstance(value, Integral) and not isinstance(value, bool):
        return sp.Integer(int(value))
    if isinstance(value, str):
        try:
            parsed = sp.Rational(value.strip())
        except (TypeError, ValueError, sp.SympifyError) as exc:
            raise ValueError(f"not a rational number: {value!r}") from exc
        return parsed
    raise ValueError(f"not an exact scalar: {value!r}")


def as_vector(values: Sequence[Any] | np.ndarray) -> np.ndarray:
    """Coerce a point to an exact (object) or float numpy vector.

    All-exact inputs become an object array of sympy Rationals; anything else is
    converted to ``float64``.
    """
    arr = np.asarray(values, dtype=object).reshape(-1)
    if arr.size and all(is_exact(v) for v in arr):
        return np.array([to_exact(v) for v in arr], dtype=object)
    return np.asarray(arr, dtype=float)


def as_matrix(values: Sequence[Sequence[Any]] | np.ndarray) -> np.ndarray:
    """Matrix counterpart of :func:`as_vector`."""
    arr = np.asarray(values, dtype=object)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    flat = arr.reshape(-1)
    if flat.size and all(is_exact(v) for v in flat):
        return np.array([to_exact(v) for v in flat], dtype=object).reshape(arr.shape)
    return np.asarray(arr, dtype=float)


def is_exact_array(arr: np.ndarray) -> bool:
    """Whether every entry of ``arr`` is an exact scalar."""
    return arr.dtype == object and all(is_exact(v) for v in arr.reshape(-1))


def _numeric_stack(
    funcs: Sequence[Callable[..., Any]], x: np.ndarray, num_vars: int
) -> np.ndarray:
    """Evaluate lambdified polynomials on ``x[..., num_vars]`` with broadcasting."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != num_vars:
        raise DimensionError(f"point has dimension {x.shape[-1]}, expected {num_vars}")
    args = [x[..., k] for k in range(num_vars)]
    batch = x.shape[:-1]
    # Constant polynomials lambdify to scalars; broadcast them to the batch shape.
    return np.stack(
        [np.broadcast_to(np.asarray(fn(*args), dtype=float), batch) for fn in funcs], axis=-1
    )


@dataclass(frozen=True)
class Polynomial:
    """Multivariate polynomial with rational coefficients.

    Attributes:
        poly: Underlying sympy ``Poly`` over ``QQ`` in the generators returned by
            :func:`variables`. Canonical form makes equality representation
            equality.
    """

    poly: Poly

    def __post_init__(self) -> None:
        if self.poly.get_domain() != QQ:
            object.__setattr__(self, "poly", self.poly.set_domain(QQ))

    @classmethod
    def from_terms(
        cls, num_vars: int, terms: Iterable[tuple[Sequence[int], Any]]
    ) -> Polynomial:
        """Build a polynomial from ``(exponents, coefficient)`` pairs.

        Repeated multi-indices are summed and zero coefficients dropped.

        Args:
            num_vars: Number of variables.
            terms: Iterable of exponent multi-index and exact coefficient.

        Returns:
            The canonical polynomial.

        Raises:
            DimensionError: If a multi-index has the wrong length.
            ValueError: If an exponent is negative or a coefficient is not exact.
        """
        coeffs: dict[tuple[int, ...], sp.Rational] = {}
        for exponents, coeff in terms:
            key = tuple(int(e) for e in exponents)
            if len(key) != num_vars:
                raise DimensionError(
                    f"multi-index {key} has {len(key)} entries, expected {num_vars}"
                )
            if any(e < 0 for e in key):
                raise ValueError(f"negative exponent in multi-index {key}")
            coeffs[key] = coeffs.get(key, sp.Integer(0)) + to_exact(coeff)
        nonzero = {k: v for k, v in coeffs.items() if v != 0}
        if not nonzero:
            return cls.zero(num_vars)
        return cls(Poly.from_dict(nonzero, *variables(num_vars), domain=QQ))

    @classmethod
    def from_expr(cls, expr: str | sp.Expr, num_vars: int) -> Polynomial:
        """Parse an expression in ``x1 … xn`` (floats are rejected upstream)."""
        gens = variables(num_vars)
        parsed = sp.sympify(expr, locals={str(g): g for g in gens}, rational=True)
        return cls(Poly(parsed, *gens, domain=QQ))

    @classmethod
    def zero(cls, num_vars: int) -> Polynomial:
        return cls(Poly(0, *variables(num_vars), domain=QQ))

    @classmethod
    def constant(cls, num_vars: int, value: Any) -> Polynomial:
        return cls(Poly(to_exact(value), *variables(num_vars), domain=QQ))

    @classmethod
    def variable(cls, num_vars: int, index: int) -> Polynomial:
        return cls(Poly(variables(num_vars)[index], *variables(num_vars), domain=QQ))

    @property
    def num_vars(self) -> int:
        return len(self.poly.gens)

    @property
    def terms(self) -> list[tuple[tuple[int, ...], sp.Rational]]:
        """Nonzero terms in graded-lexicographic order (highest first)."""
        if self.poly.is_zero:
            return []
        return [(tuple(m), sp.Rational(c)) for m, c in self.poly.terms(order="grlex")]

    @property
    def is_zero(self) -> bool:
        return bool(self.poly.is_zero)

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        return -1 if self.poly.is_zero else int(self.poly.total_degree())

    def as_expr(self) -> sp.Expr:
        return self.poly.as_expr()

    def _check(self, other: Polynomial) -> None:
        if other.num_vars != self.num_vars:
            raise DimensionError(
                f"polynomials in {self.num_vars} and {other.num_vars} variables"
            )

    def __add__(self, other: Polynomial) -> Polynomial:
        self._check(other)
        return Polynomial(self.poly + other.poly)

    def __sub__(self, other: Polynomial) -> Polynomial:
        self._check(other)
        return Polynomial(self.poly - other.poly)

    def __neg__(self) -> Polynomial:
        return Polynomial(-self.poly)

    def __mul__(self, other: Polynomial | ExactScalar) -> Polynomial:
        if isinstance(other, Polynomial):
            self._check(other)
            return Polynomial(self.poly * other.poly)
        return Polynomial(self.poly * to_exact(other))

    __rmul__ = __mul__

    def diff(self, index: int) -> Polynomial:
        """Partial derivative with respect to ``x_{index+1}``."""
        return Polynomial(self.poly.diff(self.poly.gens[index]))

    @cached_property
    def _numeric(self) -> Callable[..., Any]:
        return sp.lambdify(self.poly.gens, self.as_expr(), modules="numpy")

    def __call__(self, point: Sequence[Any] | np.ndarray) -> Any:
        """Evaluate at a point: exact (sympy Rational) when the point is exact.

        Raises:
            DimensionError: If the point dimension differs from ``num_vars``.
        """
        values = as_vector(point)
        if values.size != self.num_vars:
            raise DimensionError(
                f"point has dimension {values.size}, expected {self.num_vars}"
            )
        if values.dtype == object:
            return sp.Rational(self.poly.eval(tuple(values)))
        return float(self._numeric(*values))


@dataclass(frozen=True)
class PolyVectorField:
    """Polynomial vector field on R^n.

    Attributes:
        components: ``n`` polynomials in ``n`` variables.
    """

    components: tuple[Polynomial, ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise DimensionError("a vector field needs at least one component")
        n = len(self.components)
        for comp in self.components:
            if comp.num_vars != n:
                raise DimensionError(
                    f"component in {comp.num_vars} variables for a field of dimension {n}"
                )

    @classmethod
    def from_exprs(cls, exprs: Sequence[str | sp.Expr]) -> PolyVectorField:
        n = len(exprs)
        return cls(tuple(Polynomial.from_expr(e, n) for e in exprs))

    @classmethod
    def zero(cls, dim: int) -> PolyVectorField:
        return cls(tuple(Polynomial.zero(dim) for _ in range(dim)))

    @classmethod
    def linear(cls, matrix: Sequence[Sequence[Any]] | np.ndarray) -> PolyVectorField:
        """The linear field ``x -> A x`` for an exact square matrix ``A``."""
        a = as_matrix(matrix)
        n = a.shape[0]
        if a.shape != (n, n):
            raise DimensionError(f"linear field needs a square matrix, got {a.shape}")
        if a.dtype != object:
            raise ValueError("linear fields need exact (rational) matrix entries")
        comps = []
        for i in range(n):
            row = {
                tuple(1 if k == j else 0 for k in range(n)): a[i, j]
                for j in range(n)
                if a[i, j] != 0
            }
            comps.append(Polynomial.from_terms(n, row.items()))
        return cls(tuple(comps))

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.components)

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    def _check(self, other: PolyVectorField) -> None:
        if other.dim != self.dim:
            raise DimensionError(f"vector fields of dimension {self.dim} and {other.dim}")

    def __add__(self, other: PolyVectorField) -> PolyVectorField:
        self._check(other)
        return PolyVectorField(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: PolyVectorField) -> PolyVectorField:
        self._check(other)
        return PolyVectorField(tuple(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self) -> PolyVectorField:
        return PolyVectorField(tuple(-c for c in self.components))

    def scale(self, factor: Any) -> PolyVectorField:
        return PolyVectorField(tuple(c * factor for c in self.components))

    @cached_property
    def jacobian_map(self) -> PolyMatrixMap:
        n = self.dim
        return PolyMatrixMap(n, n, tuple(c.diff(j) for c in self.components for j in range(n)))

    @cached_property
    def _numeric_funcs(self) -> tuple[Callable[..., Any], ...]:
        return tuple(c._numeric for c in self.components)

    def numeric(self, x: np.ndarray) -> np.ndarray:
        """Float evaluation on ``x`` of shape ``(..., n)``; returns ``(..., n)``."""
        return _numeric_stack(self._numeric_funcs, x, self.dim)


@dataclass(frozen=True)
class PolyMatrixMap:
    """Matrix-valued polynomial map ``R^n -> R^{rows x cols}`` (row-major entries)."""

    rows: int
    cols: int
    entries: tuple[Polynomial, ...]

    def __post_init__(self) -> None:
        if len(self.entries) != self.rows * self.cols:
            raise DimensionError(
                f"{len(self.entries)} entries for a {self.rows}x{self.cols} matrix map"
            )
        if self.entries and len({e.num_vars for e in self.entries}) != 1:
            raise DimensionError("matrix entries use different numbers of variables")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Polynomial]]) -> PolyMatrixMap:
        ncols = len(rows[0]) if rows else 0
        if any(len(r) != ncols for r in rows):
            raise DimensionError("ragged rows in matrix map")
        return cls(len(rows), ncols, tuple(p for r in rows for p in r))

    @classmethod
    def zeros(cls, rows: int, cols: int, num_vars: int) -> PolyMatrixMap:
        return cls(rows, cols, tuple(Polynomial.zero(num_vars) for _ in range(rows * cols)))

    @classmethod
    def constant(cls, matrix: Sequence[Sequence[Any]] | np.ndarray, num_vars: int) -> PolyMatrixMap:
        a = as_matrix(matrix)
        if a.dtype != object:
            raise ValueError("constant matrix maps need exact (rational) entries")
        return cls(
            a.shape[0],
            a.shape[1],
            tuple(Polynomial.constant(num_vars, v) for v in a.reshape(-1)),
        )

    @property
    def num_vars(self) -> int:
        return self.entries[0].num_vars

    @property
    def is_zero(self) -> bool:
        return all(e.is_zero for e in self.entries)

    def entry(self, i: int, j: int) -> Polynomial:
        return self.entries[i * self.cols + j]

    def transpose(self) -> PolyMatrixMap:
        return PolyMatrixMap(
            self.cols,
            self.rows,
            tuple(self.entry(i, j) for j in range(self.cols) for i in range(self.rows)),
        )

    @property
    def T(self) -> PolyMatrixMap:  # noqa: N802
        return self.transpose()

    def is_symmetric(self) -> bool:
        return self.rows == self.cols and self == self.transpose()

    def _same_shape(self, other: PolyMatrixMap) -> None:
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise DimensionError(
                f"matrix maps of shape {self.rows}x{self.cols} and {other.rows}x{other.cols}"
            )

    def __add__(self, other: PolyMatrixMap) -> PolyMatrixMap:
        self._same_shape(other)
        return PolyMatrixMap(
            self.rows, self.cols, tuple(a + b for a, b in zip(self.entries, other.entries))
        )

    def __sub__(self, other: PolyMatrixMap) -> PolyMatrixMap:
        self._same_shape(other)
        return PolyMatrixMap(
            self.rows, self.cols, tuple(a - b for a, b in zip(self.entries, other.entries))
        )

    def __neg__(self) -> PolyMatrixMap:
        return PolyMatrixMap(self.rows, self.cols, tuple(-e for e in self.entries))

    def __matmul__(self, other: PolyMatrixMap) -> PolyMatrixMap:
        if self.cols != other.rows:
            raise DimensionError(
                f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}"
            )
        zero = Polynomial.zero(self.num_vars)
        out = []
        for i in range(self.rows):
            for j in range(other.cols):
                acc = zero
                for k in range(self.cols):
                    left, right = self.entry(i, k), other.entry(k, j)
                    if not left.is_zero and not right.is_zero:
                        acc = acc + left * right
                out.append(acc)
        return PolyMatrixMap(self.rows, other.cols, tuple(out))

    def directional_derivative(self, field: PolyVectorField) -> PolyMatrixMap:
        """The differential ``dB(m) . f(m)`` as a matrix map."""
        if field.dim != self.num_vars:
            raise DimensionError(
                f"field of dimension {field.dim} for a map in {self.num_vars} variables"
            )
        zero = Polynomial.zero(self.num_vars)
        out = []
        for e in self.entries:
            acc = zero
            for k, fk in enumerate(field.components):
                if not fk.is_zero:
                    acc = acc + e.diff(k) * fk
            out.append(acc)
        return PolyMatrixMap(self.rows, self.cols, tuple(out))

    def evaluate(self, point: Sequence[Any] | np.ndarray) -> np.ndarray:
        """Evaluate to a ``rows x cols`` array (object dtype when exact)."""
        values = as_vector(point)
        if values.dtype == object:
            return np.array([e(values) for e in self.entries], dtype=object).reshape(
                self.rows, self.cols
            )
        return self.numeric(values)

    @cached_property
    def _numeric_funcs(self) -> tuple[Callable[..., Any], ...]:
        return tuple(e._numeric for e in self.entries)

    def numeric(self, x: np.ndarray) -> np.ndarray:
        """Float evaluation on ``x`` of shape ``(..., n)``; returns ``(..., rows, cols)``."""
        flat = _numeric_stack(self._numeric_funcs, x, self.num_vars)
        return flat.reshape(*flat.shape[:-1], self.rows, self.cols)


def eval_field(f: PolyVectorField, m: Sequence[Any] | np.ndarray) -> np.ndarray:
    """Evaluate a vector field componentwise.

    Args:
        f: Vector field on R^n.
        m: Point in R^n; rational entries give an exact (object) result.

    Returns:
        Array of shape ``(n,)``.

    Raises:
        DimensionError: If ``len(m) != f.dim``.
    """
    values = as_vector(m)
    if values.size != f.dim:
        raise DimensionError(f"point has dimension {values.size}, expected {f.dim}")
    if values.dtype == object:
        return np.array([c(values) for c in f.components], dtype=object)
    return f.numeric(values)


def jacobian(f: PolyVectorField) -> PolyMatrixMap:
    """Symbolic Jacobian, entry ``(i, j) = d f_i / d x_j``."""
    return f.jacobian_map


def lie_bracket(f1: PolyVectorField, f2: PolyVectorField) -> PolyVectorField:
    """Flat Lie bracket ``[f1, f2] = Df2 . f1 - Df1 . f2``.

    Raises:
        DimensionError: If the fields have different dimensions.
    """
    f1._check(f2)
    n = f1.dim
    zero = Polynomial.zero(n)
    out = []
    for i in range(n):
        acc = zero
        for j in range(n):
            a, b = f1.components[j], f2.components[j]
            if not a.is_zero:
                acc = acc + f2.components[i].diff(j) * a
            if not b.is_zero:
                acc = acc - f1.components[i].diff(j) * b
        out.append(acc)
    return PolyVectorField(tuple(out))


def ad_iter(f0: PolyVectorField, f1: PolyVectorField, s: int) -> PolyVectorField:
    """Iterated adjoint ``ad^s f0 . f1`` (``s = 0`` returns ``f1``)."""
    if s < 0:
        raise ValueError(f"ad exponent must be non-negative, got {s}")
    out = f1
    for _ in range(s):
        out = lie_bracket(f0, out)
    return out


def second_derivative(f: PolyVectorField, v: PolyVectorField) -> PolyMatrixMap:
    """Matrix of ``h -> D^2 f(m) . (v(m), h)``, i.e. the Jacobian differentiated along ``v``."""
    return jacobian(f).directional_derivative(v)
