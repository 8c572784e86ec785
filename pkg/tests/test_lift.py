"""Tests for lifted fields on mean/covariance space.

Covers: lifted dimension and vectorization, the drift and control lifts,
lifted brackets (antisymmetry, flat projection, agreement with the biaffine
closed form, finite-difference oracle on random fields), evaluation at states
and its affinity in P, the (v, A) -> (v, AP + PA^T) map and its kernel, and
state validation.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest
import sympy as sp

from statlin_access.lift import (
    LiftedField,
    NotPositiveDefiniteError,
    NotSymmetricError,
    StatePoint,
    TangentValue,
    eval_lifted,
    lift_control,
    lift_drift,
    lifted_bracket,
    lifted_dimension,
    phi_P,
    random_state,
    unvectorize,
    upper_indices,
    vectorize,
)
from statlin_access.vf_algebra import (
    DimensionError,
    Polynomial,
    PolyMatrixMap,
    PolyVectorField,
    lie_bracket,
)

# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _state(m: list, p: list[list]) -> StatePoint:
    return StatePoint(np.array(m, dtype=object), np.array(p, dtype=object))


def _exact(values: list[list]) -> np.ndarray:
    return np.array([[sp.Rational(v) for v in row] for row in values], dtype=object)


def _random_polynomial(rng: np.random.Generator, n: int, degree: int) -> Polynomial:
    monomials = [a for a in itertools.product(range(degree + 1), repeat=n) if sum(a) <= degree]
    terms = [
        (a, sp.Rational(int(rng.integers(-4, 5)), int(rng.integers(1, 4))))
        for a in monomials
        if rng.random() < 0.6
    ]
    return Polynomial.from_terms(n, terms)


def _random_lifted(rng: np.random.Generator, n: int, degree: int = 2) -> LiftedField:
    f = PolyVectorField(tuple(_random_polynomial(rng, n, degree) for _ in range(n)))
    upper = tuple(_random_polynomial(rng, n, degree) for _ in upper_indices(n))
    return LiftedField(f, upper)


def _as_float(state: StatePoint) -> StatePoint:
    return StatePoint(state.m.astype(float), state.P.astype(float))


def _float_tangent(t: TangentValue) -> TangentValue:
    return TangentValue(np.asarray(t.v, dtype=float), np.asarray(t.Q, dtype=float))


# ---------------------------------------------------------------------------
# Dimensions and vectorization
# ---------------------------------------------------------------------------


class TestDimensions:
    @pytest.mark.parametrize(("n", "expected"), [(1, 2), (2, 5), (3, 9), (4, 14)])
    def test_lifted_dimension(self, n: int, expected: int) -> None:
        assert lifted_dimension(n) == expected

    def test_upper_indices_row_order(self) -> None:
        assert upper_indices(2) == [(0, 0), (0, 1), (1, 1)]


class TestVectorize:
    def test_layout(self) -> None:
        t = TangentValue(np.array([1, 2]), np.array([[3, 4], [4, 5]]))
        assert vectorize(t).tolist() == [1, 2, 3, 4, 5]

    def test_unvectorize_restores_symmetric_q(self) -> None:
        t = unvectorize([1, 2, 3, 4, 5], 2)
        assert t.v.tolist() == [1, 2]
        assert t.Q.tolist() == [[3, 4], [4, 5]]

    def test_unvectorize_length_check(self) -> None:
        with pytest.raises(DimensionError):
            unvectorize([1, 2, 3], 2)


# ---------------------------------------------------------------------------
# StatePoint
# ---------------------------------------------------------------------------


class TestStatePoint:
    def test_rejects_asymmetric_p(self) -> None:
        with pytest.raises(NotSymmetricError):
            _state([0, 0], [[1, 1], [0, 1]])

    def test_rejects_wrong_shape(self) -> None:
        with pytest.raises(DimensionError):
            _state([0, 0], [[1]])

    def test_positive_definite_check(self) -> None:
        assert _state([0], [[2]]).is_positive_definite()
        indefinite = _state([0, 0], [[1, 2], [2, 1]])
        assert not indefinite.is_positive_definite()
        with pytest.raises(NotPositiveDefiniteError):
            indefinite.require_positive_definite()

    def test_identity_is_exact_for_rational_m(self) -> None:
        state = StatePoint.identity([sp.Rational(1, 2), 3])
        assert state.is_exact
        assert state.P.tolist() == [[1, 0], [0, 1]]

    def test_to_dict_uses_rational_strings(self) -> None:
        assert _state([sp.Rational(1, 2)], [[3]]).to_dict() == {"m": ["1/2"], "P": [["3"]]}

    def test_random_state_is_positive_definite(self) -> None:
        rng = np.random.default_rng(7)
        for _ in range(20):
            state = random_state(rng, 3)
            assert state.is_exact
            assert state.is_positive_definite()


# ---------------------------------------------------------------------------
# Lifts and brackets
# ---------------------------------------------------------------------------


class TestLiftDrift:
    def test_b_is_g_g_transpose(self) -> None:
        f0 = PolyVectorField.from_exprs(["x2", "-x1"])
        g = PolyMatrixMap.from_rows([[Polynomial.from_expr("x1", 2)], [Polynomial.constant(2, 1)]])
        lifted = lift_drift(f0, g)
        assert lifted.B.evaluate([2, 0]).tolist() == [[4, 2], [2, 1]]

    def test_diffusion_row_mismatch(self) -> None:
        f0 = PolyVectorField.from_exprs(["x1", "x2"])
        with pytest.raises(DimensionError):
            lift_drift(f0, PolyMatrixMap.constant([[1]], 2))

    def test_control_lift_is_b_free(self) -> None:
        assert lift_control(PolyVectorField.from_exprs(["1"])).is_b_free

    def test_from_matrix_rejects_asymmetric(self) -> None:
        f = PolyVectorField.from_exprs(["x1", "x2"])
        with pytest.raises(NotSymmetricError):
            LiftedField.from_matrix(f, PolyMatrixMap.constant([[0, 1], [0, 0]], 2))


class TestLiftedBracket:
    def _drift(self) -> LiftedField:
        return lift_drift(
            PolyVectorField.from_exprs(["x1**2 + x2", "-x1"]),
            PolyMatrixMap.from_rows([[Polynomial.from_expr("x1", 2)], [Polynomial.constant(2, 1)]]),
        )

    def _control(self) -> LiftedField:
        return lift_control(PolyVectorField.from_exprs(["x2", "1"]))

    def test_f_part_is_flat_bracket(self) -> None:
        f0, f1 = self._drift(), self._control()
        assert lifted_bracket(f0, f1).f == lie_bracket(f0.f, f1.f)

    def test_antisymmetric(self) -> None:
        f0, f1 = self._drift(), self._control()
        forward = lifted_bracket(f0, f1)
        backward = lifted_bracket(f1, f0)
        assert forward.f == -backward.f
        assert forward.B == -backward.B

    def test_b_free_bracket_stays_b_free(self) -> None:
        a = lift_control(PolyVectorField.from_exprs(["x2", "0"]))
        b = lift_control(PolyVectorField.from_exprs(["0", "x1**2"]))
        assert lifted_bracket(a, b).is_b_free

    def test_bracket_matches_finite_difference_of_flows(self) -> None:
        # The lifted bracket evaluated at X equals dF2(X) F1(X) - dF1(X) F2(X)
        # on the (m, P) chart; check it by central differences.
        f0, f1 = self._drift(), self._control()
        m = np.array([0.3, -0.2])
        p = np.array([[1.0, 0.2], [0.2, 0.5]])
        x = StatePoint(m, p)
        exact = vectorize(eval_lifted(lifted_bracket(f0, f1), x)).astype(float)

        def value(field: LiftedField, mm: np.ndarray, pp: np.ndarray) -> np.ndarray:
            return vectorize(eval_lifted(field, StatePoint(mm, pp))).astype(float)

        def directional(field: LiftedField, along: TangentValue, h: float = 1e-5) -> np.ndarray:
            plus = value(field, m + h * along.v, p + h * along.Q)
            minus = value(field, m - h * along.v, p - h * along.Q)
            return (plus - minus) / (2 * h)

        t0 = eval_lifted(f0, x)
        t1 = eval_lifted(f1, x)
        t0 = TangentValue(np.asarray(t0.v, dtype=float), np.asarray(t0.Q, dtype=float))
        t1 = TangentValue(np.asarray(t1.v, dtype=float), np.asarray(t1.Q, dtype=float))
        approx = directional(f1, t0) - directional(f0, t1)
        np.testing.assert_allclose(exact, approx, rtol=1e-6, atol=1e-6)

    def test_biaffine_b_part(self) -> None:
        # For F0 = (A0 x, g g^T) and Fj = (Aj x, 0): B-part of [F0, Fj] is Aj g g^T + g g^T Aj^T.
        a0 = [[0, 1], [-1, 0]]
        aj = [[1, 0], [1, 2]]
        g = [[1], [1]]
        f0 = lift_drift(PolyVectorField.linear(a0), PolyMatrixMap.constant(g, 2))
        fj = lift_control(PolyVectorField.linear(aj))
        b = lifted_bracket(f0, fj).B.evaluate([0, 0])
        a = np.array(aj)
        gg = np.array(g) @ np.array(g).T
        assert b.tolist() == (a @ gg + gg @ a.T).tolist()


class TestEvalLifted:
    def test_exact_evaluation(self) -> None:
        f = lift_control(PolyVectorField.from_exprs(["x1**2"]))
        t = eval_lifted(f, _state([sp.Rational(1, 2)], [[2]]))
        # (m^2, 2 * 2m * P)
        assert t.v.tolist() == [sp.Rational(1, 4)]
        assert t.Q.tolist() == [[4]]

    def test_dimension_mismatch(self) -> None:
        f = lift_control(PolyVectorField.from_exprs(["x1"]))
        with pytest.raises(DimensionError):
            eval_lifted(f, StatePoint.identity([0, 0]))


class TestPhiP:
    def test_image(self) -> None:
        t = phi_P([1, 0], _exact([[0, 1], [0, 0]]), _exact([[2, 0], [0, 1]]))
        assert t.v.tolist() == [1, 0]
        assert t.Q.tolist() == [[0, 1], [1, 0]]

    def test_rejects_non_pd(self) -> None:
        with pytest.raises(NotPositiveDefiniteError):
            phi_P([0], _exact([[1]]), _exact([[-1]]))


class TestRandomLiftedBrackets:
    """Lifted brackets of random fields with n in {1, 2, 3} and degree <= 2."""

    @staticmethod
    def _directional(field: LiftedField, x: StatePoint, along: TangentValue) -> np.ndarray:
        norm = float(np.linalg.norm(vectorize(along)))
        if norm == 0.0:
            return np.zeros(lifted_dimension(x.dim))
        h = 1e-5 / norm
        plus = eval_lifted(field, StatePoint(x.m + h * along.v, x.P + h * along.Q))
        minus = eval_lifted(field, StatePoint(x.m - h * along.v, x.P - h * along.Q))
        return (vectorize(plus).astype(float) - vectorize(minus).astype(float)) / (2 * h)

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_finite_difference_of_flows(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        n = 1 + seed % 3
        f1, f2 = _random_lifted(rng, n), _random_lifted(rng, n)
        state = random_state(rng, n)
        bracket = lifted_bracket(f1, f2)
        assert bracket.f == lie_bracket(f1.f, f2.f)

        exact = vectorize(eval_lifted(bracket, state)).astype(float)
        x = _as_float(state)
        forward = self._directional(f2, x, _float_tangent(eval_lifted(f1, state)))
        backward = self._directional(f1, x, _float_tangent(eval_lifted(f2, state)))
        scale = max(1.0, float(np.abs(forward).max()), float(np.abs(backward).max()))
        np.testing.assert_allclose(forward - backward, exact, rtol=1e-5, atol=1e-5 * scale)

    @pytest.mark.parametrize("seed", range(10))
    def test_evaluation_is_affine_in_p(self, seed: int) -> None:
        rng = np.random.default_rng(500 + seed)
        n = 1 + seed % 3
        field = _random_lifted(rng, n)
        first, second = random_state(rng, n), random_state(rng, n)
        m = first.m
        alpha = sp.Rational(int(rng.integers(-5, 6)), 4)
        t1 = eval_lifted(field, StatePoint(m, first.P))
        t2 = eval_lifted(field, StatePoint(m, second.P))
        mixed = eval_lifted(field, StatePoint(m, first.P * alpha + second.P * (1 - alpha)))
        assert (mixed.v == t1.v).all()
        assert (mixed.Q == t1.Q * alpha + t2.Q * (1 - alpha)).all()


class TestPhiPKernel:
    """(0, Lambda P^-1) lies in the kernel of phi_P for skew Lambda."""

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_skew_times_inverse_vanishes(self, n: int) -> None:
        rng = np.random.default_rng(n)
        for _ in range(10):
            raw = rng.standard_normal((n, n))
            skew = raw - raw.T
            lower = rng.standard_normal((n, n))
            p = lower @ lower.T + 0.1 * np.eye(n)
            p = (p + p.T) / 2
            t = phi_P(np.zeros(n), skew @ np.linalg.inv(p), p)
            assert np.abs(t.v).max() == 0.0
            np.testing.assert_allclose(t.Q, 0.0, atol=1e-10)
