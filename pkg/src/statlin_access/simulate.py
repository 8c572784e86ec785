"""Simulation of the statistical linearization and its SDE.

Three views of the same controlled SDE:

- ``integrate_statlin``: RK4 on the coupled mean/covariance ODE
  ``m' = f(m, u)``, ``P' = Df(m, u) P + P Df(m, u)^T + g(m) g(m)^T``.
- ``closed_form_trajectory``: the covariance written with the fundamental
  matrix of the linearized mean dynamics and a trapezoidal quadrature.
- ``euler_maruyama``: Monte Carlo moments of the SDE itself.

``empirical_accessibility`` and ``genericity_experiment`` use these to probe the
rank conditions numerically.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
import sympy as sp
from scipy.integrate import cumulative_trapezoid

from statlin_access.config import (
    DEFAULT_BLOWUP_BOUND,
    DEFAULT_DT,
    DEFAULT_MC_CHUNK_SIZE,
    DEFAULT_WORKERS,
)
from statlin_access.lift import (
    NotPositiveDefiniteError,
    NotSymmetricError,
    StatePoint,
    TangentValue,
    lifted_dimension,
    vectorize,
)
from statlin_access.models import (
    AccessibilityProbe,
    Condition,
    GenericityReport,
    MonteCarloEstimate,
    SimulationResult,
)
from statlin_access.rank_engine import (
    DEFAULT_TOL,
    check_condition_1,
    check_condition_2,
    check_hormander_lifted,
    numerical_rank,
)
from statlin_access.systems import ControlAffineSystem
from statlin_access.vf_algebra import DimensionError, Polynomial, PolyVectorField, to_exact

logger = logging.getLogger(__name__)

_STEP_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Piecewise-constant open-loop control on ``[0, horizon]``.

    Attributes:
        values: Shape ``(K, m_u)``; row ``k`` holds on the ``k``-th of ``K``
            equal segments.
        horizon: Final time ``T > 0``.
    """

    values: np.ndarray
    horizon: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError(f"control values must have shape (K, m_u) with K >= 1, got {arr.shape}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def constant(
        cls, u: Sequence[float], horizon: float, segments: int = 1
    ) -> ControlSignal:
        row = np.asarray(u, dtype=float).reshape(1, -1)
        return cls(np.repeat(row, segments, axis=0), horizon)

    @classmethod
    def zeros(cls, m_u: int, horizon: float, segments: int = 1) -> ControlSignal:
        return cls(np.zeros((segments, m_u)), horizon)

    @property
    def segments(self) -> int:
        return int(self.values.shape[0])

    @property
    def m_u(self) -> int:
        return int(self.values.shape[1])

    def steps(self, dt: float) -> int:
        """Number of integration steps of size ``dt``.

        Raises:
            ValueError: If ``dt <= 0``, ``T/dt`` is not an integer, or the
                control segments do not fall on the step grid.
        """
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        ratio = self.horizon / dt
        steps = round(ratio)
        if steps < 1 or abs(ratio - steps) > _STEP_TOLERANCE * max(1.0, ratio):
            raise ValueError(f"horizon {self.horizon} is not an integer multiple of dt={dt}")
        if steps % self.segments:
            raise ValueError(
                f"{self.segments} control segments do not align with {steps} steps of dt={dt}"
            )
        return steps

    def value_at_step(self, k: int, steps: int) -> np.ndarray:
        return self.values[k * self.segments // steps]

    def perturbed(self, direction: np.ndarray, h: float) -> ControlSignal:
        return ControlSignal(self.values + h * np.asarray(direction, dtype=float), self.horizon)

    def refined(self, factor: int) -> ControlSignal:
        """Split every segment into ``factor`` equal sub-segments with the same value."""
        if factor < 1:
            raise ValueError(f"factor must be at least 1, got {factor}")
        return ControlSignal(np.repeat(self.values, factor, axis=0), self.horizon)


def _initial_state(
    sys: ControlAffineSystem, m0: Sequence[float], P0: Any  # noqa: N803
) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(m0, dtype=float).reshape(-1)
    p = np.asarray(P0, dtype=float)
    if m.size != sys.n or p.shape != (sys.n, sys.n):
        raise DimensionError(
            f"initial state has shapes {m.shape} and {p.shape} for a system of dimension {sys.n}"
        )
    if not np.allclose(p, p.T, rtol=1e-12, atol=1e-12):
        raise NotSymmetricError("P0 must be symmetric")
    if np.linalg.eigvalsh(p).min() <= 0:
        raise NotPositiveDefiniteError("P0 must be positive definite")
    return m, 0.5 * (p + p.T)


def _check_control(sys: ControlAffineSystem, u: ControlSignal) -> None:
    if u.m_u != sys.m_u:
        raise DimensionError(f"control has {u.m_u} components, system has {sys.m_u}")


def _statlin_rhs(
    sys: ControlAffineSystem, m: np.ndarray, p: np.ndarray, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    jac = sys.vector_field_jacobian(m, u)
    g = sys.diffusion_at(m)
    return sys.vector_field(m, u), jac @ p + p @ jac.T + g @ g.T


def _rk4_step(
    sys: ControlAffineSystem, m: np.ndarray, p: np.ndarray, u: np.ndarray, h: float
) -> tuple[np.ndarray, np.ndarray]:
    k1m, k1p = _statlin_rhs(sys, m, p, u)
    k2m, k2p = _statlin_rhs(sys, m + 0.5 * h * k1m, p + 0.5 * h * k1p, u)
    k3m, k3p = _statlin_rhs(sys, m + 0.5 * h * k2m, p + 0.5 * h * k2p, u)
    k4m, k4p = _statlin_rhs(sys, m + h * k3m, p + h * k3p, u)
    m_next = m + h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
    p_next = p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return m_next, 0.5 * (p_next + p_next.T)


def _advance(
    sys: ControlAffineSystem,
    m: np.ndarray,
    p: np.ndarray,
    u: np.ndarray,
    dt: float,
    max_halvings: int,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """One grid step, halving the substep while ``P`` loses definiteness."""
    m_next, p_next = m, p
    for level in range(max_halvings + 1):
        substeps = 2**level
        h = dt / substeps
        m_next, p_next = m, p
        for _ in range(substeps):
            m_next, p_next = _rk4_step(sys, m_next, p_next, u, h)
        if not (np.all(np.isfinite(m_next)) and np.all(np.isfinite(p_next))):
            return m_next, p_next, False
        if np.linalg.eigvalsh(p_next).min() > 0:
            return m_next, p_next, True
        logger.debug("P not positive definite after step %g, halving", h)
    return m_next, p_next, False


def _blown_up(bound: float, *arrays: np.ndarray) -> bool:
    return any(not np.all(np.isfinite(a)) or np.abs(a).max() > bound for a in arrays)


def integrate_statlin(
    sys: ControlAffineSystem,
    u: ControlSignal,
    m0: Sequence[float],
    P0: Any,  # noqa: N803
    *,
    dt: float = DEFAULT_DT,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
    max_halvings: int = 3,
) -> SimulationResult:
    """Fixed-step RK4 on the coupled mean/covariance system.

    ``P`` is symmetrized after every step and its smallest eigenvalue checked;
    on a violation the step is retried with halved substeps up to
    ``max_halvings`` times, after which the step is kept and flagged.

    Args:
        sys: Control-affine system.
        u: Control on ``[0, T]``.
        m0: Initial mean.
        P0: Initial covariance, symmetric positive definite.
        dt: Step size; ``T/dt`` must be an integer.
        blowup_bound: Entry magnitude treated as divergence.
        max_halvings: Retries with smaller substeps on a definiteness loss.

    Returns:
        Trajectory on the step grid, truncated with a diagnostic on blow-up.

    Raises:
        NotPositiveDefiniteError: If ``P0`` is not positive definite.
        ValueError: On inconsistent dimensions or step grid.
    """
    _check_control(sys, u)
    m, p = _initial_state(sys, m0, P0)
    steps = u.steps(dt)
    times = np.linspace(0.0, u.horizon, steps + 1)
    ms = np.empty((steps + 1, sys.n))
    ps = np.empty((steps + 1, sys.n, sys.n))
    pd = np.ones(steps + 1, dtype=bool)
    ms[0], ps[0] = m, p
    diagnostic = None
    last = steps

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            m, p, ok = _advance(sys, m, p, u.value_at_step(k, steps), dt, max_halvings)
            if _blown_up(blowup_bound, m, p):
                diagnostic = f"blow-up at t={times[k + 1]:.6g}: state exceeded {blowup_bound:g}"
                logger.warning("Trajectory truncated, %s", diagnostic)
                last = k
                break
            if not ok:
                logger.warning("P not positive definite at t=%.6g", times[k + 1])
            ms[k + 1], ps[k + 1], pd[k + 1] = m, p, ok

    keep = last + 1
    return SimulationResult("rk4", times[:keep], ms[:keep], ps[:keep], pd[:keep], diagnostic)


def closed_form_trajectory(
    sys: ControlAffineSystem,
    u: ControlSignal,
    m0: Sequence[float],
    P0: Any,  # noqa: N803
    *,
    dt: float = DEFAULT_DT,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
) -> SimulationResult:
    """Covariance via the fundamental matrix of the linearized mean dynamics.

    ``Phi(t) = Phi(t, 0)`` is integrated with RK4 alongside ``m``, then
    ``P(t) = Phi(t) [P0 + int_0^t Phi(s)^-1 g g^T Phi(s)^-T ds] Phi(t)^T`` with
    the integral from a cumulative trapezoid rule on the step grid.
    """
    _check_control(sys, u)
    m, p0 = _initial_state(sys, m0, P0)
    n = sys.n
    steps = u.steps(dt)
    times = np.linspace(0.0, u.horizon, steps + 1)
    ms = np.empty((steps + 1, n))
    phis = np.empty((steps + 1, n, n))
    phi = np.eye(n)
    ms[0], phis[0] = m, phi
    diagnostic = None
    last = steps

    def rhs(x: np.ndarray, fm: np.ndarray, uk: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return sys.vector_field(x, uk), sys.vector_field_jacobian(x, uk) @ fm

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            uk = u.value_at_step(k, steps)
            k1 = rhs(m, phi, uk)
            k2 = rhs(m + 0.5 * dt * k1[0], phi + 0.5 * dt * k1[1], uk)
            k3 = rhs(m + 0.5 * dt * k2[0], phi + 0.5 * dt * k2[1], uk)
            k4 = rhs(m + dt * k3[0], phi + dt * k3[1], uk)
            m = m + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            phi = phi + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            if _blown_up(blowup_bound, m, phi):
                diagnostic = f"blow-up at t={times[k + 1]:.6g}: state exceeded {blowup_bound:g}"
                logger.warning("Trajectory truncated, %s", diagnostic)
                last = k
                break
            ms[k + 1], phis[k + 1] = m, phi

    keep = last + 1
    ms, phis, times = ms[:keep], phis[:keep], times[:keep]
    g = sys.diffusion_at(ms)
    gg = g @ np.swapaxes(g, -1, -2)
    phi_inv = np.linalg.inv(phis)
    integrand = phi_inv @ gg @ np.swapaxes(phi_inv, -1, -2)
    if keep > 1:
        accumulated = cumulative_trapezoid(integrand, dx=dt, axis=0, initial=0)
    else:
        accumulated = np.zeros_like(integrand)
    ps = phis @ (p0 + accumulated) @ np.swapaxes(phis, -1, -2)
    ps = 0.5 * (ps + np.swapaxes(ps, -1, -2))
    pd = np.linalg.eigvalsh(ps).min(axis=-1) > 0
    return SimulationResult("closedform", times, ms, ps, pd, diagnostic)


def lyapunov_closed_form(
    sys: ControlAffineSystem,
    u: ControlSignal,
    m0: Sequence[float],
    P0: Any,  # noqa: N803
    t: float | None = None,
    *,
    dt: float = DEFAULT_DT,
) -> np.ndarray:
    """``P(t)`` from :func:`closed_form_trajectory`; ``t`` defaults to the horizon.

    Raises:
        ValueError: If ``t`` is outside the computed grid or off it.
    """
    result = closed_form_trajectory(sys, u, m0, P0, dt=dt)
    if t is None:
        return result.P[-1]
    k = round(t / dt)
    if k < 0 or k >= result.times.size or abs(k * dt - t) > _STEP_TOLERANCE * max(1.0, t):
        raise ValueError(f"t={t} is not a computed grid time")
    return result.P[k]


def _run_chunk(
    sys: ControlAffineSystem,
    u: ControlSignal,
    mean0: np.ndarray,
    cov0: np.ndarray | None,
    size: int,
    stream: np.random.SeedSequence,
    dt: float,
    steps: int,
    record: set[int],
    bound: float,
) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(stream)
    if cov0 is None:
        x = np.tile(mean0, (size, 1))
    else:
        x = rng.multivariate_normal(mean0, cov0, size=size)
    alive = np.ones(size, dtype=bool)
    snapshots = [x.copy()]
    sqrt_dt = math.sqrt(dt)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            uk = u.value_at_step(k, steps)
            g = sys.diffusion_at(x)
            dw = rng.standard_normal((size, sys.d)) * sqrt_dt
            x = x + sys.vector_field(x, uk) * dt + np.einsum("pij,pj->pi", g, dw)
            bad = ~np.all(np.isfinite(x), axis=1) | (np.abs(x).max(axis=1) > bound)
            if bad.any():
                alive &= ~bad
                x[~alive] = 0.0
            if k + 1 in record:
                snapshots.append(x.copy())
    return np.stack(snapshots), alive


def euler_maruyama(
    sys: ControlAffineSystem,
    u: ControlSignal,
    x0: Sequence[float],
    *,
    dt: float = DEFAULT_DT,
    paths: int = 10_000,
    seed: int = 0,
    P0: Any | None = None,  # noqa: N803
    chunk_size: int = DEFAULT_MC_CHUNK_SIZE,
    workers: int = DEFAULT_WORKERS,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
    max_records: int = 200,
) -> MonteCarloEstimate:
    """Monte Carlo moments of the SDE by Euler-Maruyama.

    Initial states are ``x0`` or, when ``P0`` is given, draws from
    ``N(x0, P0)``. Paths are split into chunks, each with its own child of
    ``SeedSequence(seed)``, run on a thread pool and merged in chunk order, so
    results do not depend on scheduling. Paths that leave ``blowup_bound`` are
    excluded from every recorded time.

    Args:
        sys: Control-affine system.
        u: Control on ``[0, T]``.
        x0: Initial mean.
        dt: Step size; ``T/dt`` must be an integer.
        paths: Number of paths, at least 2.
        seed: Master seed.
        P0: Optional initial covariance.
        chunk_size: Paths per chunk.
        workers: Thread pool size.
        blowup_bound: Entry magnitude treated as divergence.
        max_records: Upper bound on recorded grid times.

    Returns:
        Sample means, covariances and standard errors at recorded times.

    Raises:
        ValueError: If ``paths < 2`` or the grid is inconsistent.
    """
    if paths < 2:
        raise ValueError(f"paths must be at least 2, got {paths}")
    _check_control(sys, u)
    mean0 = np.asarray(x0, dtype=float).reshape(-1)
    if mean0.size != sys.n:
        raise DimensionError(f"x0 has dimension {mean0.size}, expected {sys.n}")
    cov0 = None
    if P0 is not None:
        cov = np.asarray(P0, dtype=float)
        if cov.shape != (sys.n, sys.n):
            raise DimensionError(f"P0 has shape {cov.shape}, expected ({sys.n}, {sys.n})")
        if np.any(cov != 0.0):
            cov0 = cov
    steps = u.steps(dt)
    stride = max(1, math.ceil(steps / max_records))
    recorded = sorted(set(range(0, steps + 1, stride)) | {steps})
    record = set(recorded) - {0}

    sizes = [min(chunk_size, paths - start) for start in range(0, paths, chunk_size)]
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            pool.map(
                lambda job: _run_chunk(
                    sys, u, mean0, cov0, job[0], job[1], dt, steps, record, blowup_bound
                ),
                zip(sizes, streams),
            )
        )

    samples = np.concatenate([r[0] for r in results], axis=1)
    alive = np.concatenate([r[1] for r in results])
    excluded = int((~alive).sum())
    if excluded:
        logger.warning("Excluded %d of %d Monte Carlo paths after blow-up", excluded, paths)
    kept = samples[:, alive, :]
    count = kept.shape[1]
    times = np.asarray(recorded, dtype=float) * dt
    n = sys.n
    if count < 2:
        logger.warning("Fewer than two bounded paths; moments undefined")
        nan = np.full((len(recorded), n), np.nan)
        nan2 = np.full((len(recorded), n, n), np.nan)
        return MonteCarloEstimate(times, nan, nan2, nan, nan2, count, excluded, seed)

    mean = kept.mean(axis=1)
    dev = kept - mean[:, None, :]
    cov = np.einsum("rpi,rpj->rij", dev, dev) / (count - 1)
    mean_se = kept.std(axis=1, ddof=1) / math.sqrt(count)
    cov_se = np.empty_like(cov)
    for i in range(n):
        for j in range(i, n):
            prod = dev[..., i] * dev[..., j]
            cov_se[:, i, j] = cov_se[:, j, i] = prod.std(axis=1, ddof=1) / math.sqrt(count)
    return MonteCarloEstimate(times, mean, cov, mean_se, cov_se, count, excluded, seed)


def _endpoint(result: SimulationResult) -> np.ndarray:
    return vectorize(TangentValue(result.m[-1], result.P[-1])).astype(float)


def _refinement_factor(u: ControlSignal, target: int, steps: int) -> int | None:
    """Smallest split of the segments giving at least ``target`` control values.

    The refined segments must still fall on the step grid; None when no split
    does.
    """
    needed = math.ceil(target / u.m_u)
    per_segment = steps // u.segments
    for factor in range(1, per_segment + 1):
        if u.segments * factor >= needed and per_segment % factor == 0:
            return factor
    return None


def empirical_accessibility(
    sys: ControlAffineSystem,
    u_nominal: ControlSignal,
    X0: StatePoint,  # noqa: N803
    *,
    n_directions: int | None = None,
    h: float = 1e-4,
    dt: float = DEFAULT_DT,
    seed: int = 0,
    tol: float = 1e-6,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
) -> AccessibilityProbe:
    """Numerical rank of the endpoint map ``u -> (m(T), P(T))`` near ``u_nominal``.

    Random directions in the space of piecewise-constant controls are
    differenced centrally with step ``h``; the rank counts singular values above
    ``tol`` times the largest. Segments are first split, on the step grid, until
    there are at least N control values; when the grid is too coarse the probe
    is returned inconclusive.

    Raises:
        ValueError: If ``h <= 0``.
        NotPositiveDefiniteError: If ``X0.P`` is not positive definite.
    """
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    X0.require_positive_definite()
    _check_control(sys, u_nominal)
    target = lifted_dimension(sys.n)
    if u_nominal.m_u == 0:
        return AccessibilityProbe(0, target, [], 0, h)
    factor = _refinement_factor(u_nominal, target, u_nominal.steps(dt))
    if factor is None:
        diagnostic = (
            f"{u_nominal.steps(dt)} steps of dt={dt} cannot carry {target} control values "
            f"with {u_nominal.m_u} input(s); use a smaller dt"
        )
        logger.warning("Endpoint rank probe inconclusive: %s", diagnostic)
        return AccessibilityProbe(0, target, [], 0, h, False, diagnostic)
    if factor > 1:
        logger.debug("Refining %d control segments by %d", u_nominal.segments, factor)
        u_nominal = u_nominal.refined(factor)
    shape = u_nominal.values.shape
    count = n_directions if n_directions is not None else max(target, shape[0] * shape[1])
    if count == 0:
        return AccessibilityProbe(0, target, [], count, h)

    m0 = np.asarray(X0.m, dtype=float)
    p0 = np.asarray(X0.P, dtype=float)
    rng = np.random.default_rng(seed)
    columns = []
    for _ in range(count):
        direction = rng.standard_normal(shape)
        direction /= np.linalg.norm(direction)
        plus = integrate_statlin(
            sys, u_nominal.perturbed(direction, h), m0, p0, dt=dt, blowup_bound=blowup_bound
        )
        minus = integrate_statlin(
            sys, u_nominal.perturbed(direction, -h), m0, p0, dt=dt, blowup_bound=blowup_bound
        )
        if plus.truncated or minus.truncated:
            diagnostic = plus.diagnostic or minus.diagnostic
            return AccessibilityProbe(0, target, [], count, h, False, diagnostic)
        columns.append((_endpoint(plus) - _endpoint(minus)) / (2.0 * h))

    jac = np.array(columns)
    singular = np.linalg.svd(jac, compute_uv=False)
    rank = numerical_rank(list(jac), tol)
    logger.info("Endpoint map rank %d/%d over %d directions", rank, target, count)
    return AccessibilityProbe(rank, target, [float(s) for s in singular], count, h)


_CHECKERS = {
    Condition.COND1: check_condition_1,
    Condition.COND2: check_condition_2,
    Condition.HORMANDER: check_hormander_lifted,
}


def _exact_epsilon(epsilon: Any) -> sp.Rational:
    if isinstance(epsilon, float):
        return sp.Rational(repr(epsilon))
    return to_exact(epsilon)


def _monomials(n: int, degree: int) -> list[tuple[int, ...]]:
    return [
        alpha
        for alpha in itertools.product(range(degree + 1), repeat=n)
        if 1 <= sum(alpha) <= degree
    ]


def _sample_points(rng: np.random.Generator, n: int, count: int) -> list[list[sp.Rational]]:
    points: list[list[sp.Rational]] = []
    while len(points) < count:
        point = [sp.Rational(int(rng.integers(-20, 21)), 10) for _ in range(n)]
        # Drift perturbations have no constant term, so every field vanishes at 0.
        if any(v != 0 for v in point):
            points.append(point)
    return points


def genericity_experiment(
    sys: ControlAffineSystem,
    epsilon: Any,
    trials: int,
    degree: int,
    seed: int = 0,
    *,
    condition: Condition = Condition.COND1,
    points: Sequence[Sequence[Any]] | None = None,
    n_points: int = 3,
    depth_cap: int | None = None,
    tol: float = DEFAULT_TOL,
    aux_probes: int = 3,
) -> GenericityReport:
    """Fraction of randomly perturbed systems that satisfy a rank condition.

    Every coefficient of every monomial of degree ``1 … degree`` in each
    perturbed field gets rational noise ``epsilon * k / 1000`` with ``k``
    uniform in ``[-1000, 1000]``. Constant terms are left alone, so degree-1
    noise keeps a biaffine system biaffine. The ``hormander`` condition perturbs
    only the control fields.

    Args:
        sys: Seed system.
        epsilon: Noise amplitude, non-negative.
        trials: Number of perturbed systems, at least 1.
        degree: Highest perturbed monomial degree, at least 1.
        seed: Seed for the noise and the sample points.
        condition: Condition re-checked on each trial.
        points: Fixed sample points; drawn as nonzero rationals when omitted.
        n_points: Number of drawn points.
        depth_cap: Bracket depth cap for each check.
        tol: Relative threshold for float ranks.
        aux_probes: Auxiliary probes per check.

    Returns:
        Per-trial verdicts and the pass fraction.

    Raises:
        ValueError: On invalid trial counts, degrees, amplitudes or conditions.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    if degree < 1:
        raise ValueError(f"degree must be at least 1, got {degree}")
    eps = _exact_epsilon(epsilon)
    if eps < 0:
        raise ValueError(f"epsilon must be non-negative, got {eps}")
    if condition not in _CHECKERS:
        raise ValueError(f"condition {condition} cannot be probed for genericity")
    if condition == Condition.HORMANDER and sys.m_u < 2:
        raise ValueError("the hormander condition needs at least two control fields")

    rng = np.random.default_rng(seed)
    n = sys.n
    sample = [list(p) for p in points] if points is not None else _sample_points(rng, n, n_points)
    monomials = _monomials(n, degree)
    first = 1 if condition == Condition.HORMANDER else 0
    checker = _CHECKERS[condition]

    verdicts = []
    for trial in range(trials):
        fields = list(sys.fields)
        for k in range(first, len(fields)):
            components = []
            for comp in fields[k].components:
                noise = Polynomial.from_terms(
                    n,
                    [
                        (alpha, eps * sp.Rational(int(rng.integers(-1000, 1001)), 1000))
                        for alpha in monomials
                    ],
                )
                components.append(comp + noise)
            fields[k] = PolyVectorField(tuple(components))
        report = checker(
            sys.with_fields(fields),
            sample,
            depth_cap,
            tol,
            aux_probes=aux_probes,
            seed=seed,
        )
        verdicts.append(report.overall_verdict)
        logger.debug("Genericity trial %d: %s", trial, report.overall_verdict)

    result = GenericityReport(
        condition=condition,
        epsilon=str(eps),
        degree=degree,
        trials=trials,
        seed=seed,
        verdicts=verdicts,
        points=[{"m": [str(to_exact(v)) for v in p]} for p in sample],
    )
    logger.info("Genericity: %d/%d trials pass %s", result.passes, trials, condition)
    return result
