"""Data models for analysis reports and simulation results.

Reports are plain dataclasses serializable to JSON. Exact quantities are
written as rational strings ("p/q") so saved reports stay exact and byte-stable;
nothing time-dependent is stored, so identical runs give identical JSON.

Typical usage::

    from statlin_access.models import RankReport

    report = RankReport.from_dict(json.loads(text))
    report.overall_verdict      # Verdict.PASS
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import numpy as np


class Condition(StrEnum):
    """Which rank condition a report decides."""

    COND1 = "cond1"
    COND2 = "cond2"
    HORMANDER = "hormander"
    LIFTED_AT_STATE = "lifted_at_state"


class Verdict(StrEnum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive-at-cap"


EXIT_CODES: dict[Verdict, int] = {
    Verdict.PASS: 0,
    Verdict.FAIL: 2,
    Verdict.INCONCLUSIVE: 3,
}


@dataclass
class RankReport:
    """Outcome of a rank-condition check over a list of points.

    Attributes:
        condition: Condition that was checked.
        mode: Bracket saturation mode used to build the family.
        target: Required rank (the lifted dimension N).
        points: Serialized points or states, one per verdict.
        ranks: Rank of the saturated family at each point.
        verdicts: Per-point verdict.
        depth_cap: Bracket depth allowed.
        depth_used: Deepest bracket level explored.
        closed: True when every bracket of retained elements was tested
            before the cap, so a rank deficit is final.
        basis: Bracket expressions of the retained elements, e.g. ``[f0,f1]``.
        tolerance: Relative singular-value threshold (float path only).
        exact: True when every rank was computed in rational arithmetic.
        generic_rank: Rank at a random high-denominator rational point, or
            None when not requested.
    """

    condition: Condition
    mode: str
    target: int
    points: list[dict[str, Any]]
    ranks: list[int]
    verdicts: list[Verdict]
    depth_cap: int
    depth_used: int
    closed: bool
    basis: list[str] = field(default_factory=list)
    tolerance: float = 1e-8
    exact: bool = True
    generic_rank: int | None = None

    @property
    def overall_verdict(self) -> Verdict:
        """Pass only if every point passes; any failure wins over inconclusive."""
        if not self.verdicts:
            return Verdict.INCONCLUSIVE
        if all(v == Verdict.PASS for v in self.verdicts):
            return Verdict.PASS
        if any(v == Verdict.FAIL for v in self.verdicts):
            return Verdict.FAIL
        return Verdict.INCONCLUSIVE

    @property
    def pass_fraction(self) -> float:
        if not self.verdicts:
            return 0.0
        return sum(v == Verdict.PASS for v in self.verdicts) / len(self.verdicts)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.overall_verdict]

    def to_dict(self) -> dict[str, Any]:
        """Serialize to a JSON-compatible dictionary.

        Returns:
            Dictionary with all fields plus the overall verdict.
        """
        return {
            "condition": str(self.condition),
            "mode": self.mode,
            "target": self.target,
            "points": self.points,
            "ranks": self.ranks,
            "verdicts": [str(v) for v in self.verdicts],
            "overall": str(self.overall_verdict),
            "depth_cap": self.depth_cap,
            "depth_used": self.depth_used,
            "closed": self.closed,
            "basis": self.basis,
            "tolerance": self.tolerance,
            "exact": self.exact,
            "generic_rank": self.generic_rank,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RankReport:
        """Deserialize from a JSON-compatible dictionary.

        Args:
            data: Dictionary produced by :meth:`to_dict`.

        Returns:
            RankReport instance.
        """
        return cls(
            condition=Condition(data["condition"]),
            mode=data["mode"],
            target=data["target"],
            points=data["points"],
            ranks=data["ranks"],
            verdicts=[Verdict(v) for v in data["verdicts"]],
            depth_cap=data["depth_cap"],
            depth_used=data["depth_used"],
            closed=data["closed"],
            basis=data.get("basis", []),
            tolerance=data.get("tolerance", 1e-8),
            exact=data.get("exact", True),
            generic_rank=data.get("generic_rank"),
        )


@dataclass
class BiaffineReport:
    """Sufficient fixed-time accessibility test for a biaffine system.

    Attributes:
        n: State dimension.
        m_u: Number of control matrices.
        lie_dim: Dimension of the matrix Lie algebra of the control matrices.
        hypothesis_i: The control matrices generate all of ``gl(n)``.
        hypothesis_ii: Some ``B_0i = A_i g g^T + g g^T A_i^T`` is nonzero.
        b0: The matrices ``B_0i`` as rational strings, ``i = 1 … m_u``.
        certificate: Witness state with nonzero linear functional value, as
            ``{"index", "m", "P", "alpha"}``, or None.
        conclusion: ``"accessible in fixed time on an open dense set"`` or
            ``"no conclusion"``.
        samples: Random states checked directly.
        seed: Seed of the random draws.
        rank_report: Direct lifted rank check at the sampled states, or None
            when the hypotheses fail.
    """

    n: int
    m_u: int
    lie_dim: int
    hypothesis_i: bool
    hypothesis_ii: bool
    b0: list[list[list[str]]]
    certificate: dict[str, Any] | None
    conclusion: str
    samples: int
    seed: int
    rank_report: RankReport | None = None

    @property
    def hypotheses_hold(self) -> bool:
        return self.hypothesis_i and self.hypothesis_ii

    @property
    def pass_fraction(self) -> float | None:
        return None if self.rank_report is None else self.rank_report.pass_fraction

    @property
    def exit_code(self) -> int:
        """0 when the sufficient test concludes, 3 when it is silent."""
        return EXIT_CODES[Verdict.PASS] if self.hypotheses_hold else EXIT_CODES[Verdict.INCONCLUSIVE]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "m_u": self.m_u,
            "lie_dim": self.lie_dim,
            "hypothesis_i": self.hypothesis_i,
            "hypothesis_ii": self.hypothesis_ii,
            "b0": self.b0,
            "certificate": self.certificate,
            "conclusion": self.conclusion,
            "samples": self.samples,
            "seed": self.seed,
            "pass_fraction": self.pass_fraction,
            "rank_report": None if self.rank_report is None else self.rank_report.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> BiaffineReport:
        rank = data.get("rank_report")
        return cls(
            n=data["n"],
            m_u=data["m_u"],
            lie_dim=data["lie_dim"],
            hypothesis_i=data["hypothesis_i"],
            hypothesis_ii=data["hypothesis_ii"],
            b0=data["b0"],
            certificate=data.get("certificate"),
            conclusion=data["conclusion"],
            samples=data["samples"],
            seed=data["seed"],
            rank_report=None if rank is None else RankReport.from_dict(rank),
        )


@dataclass
class GenericityReport:
    """Pass fraction of a rank condition under random drift perturbations.

    Attributes:
        condition: Condition re-checked on every perturbed system.
        epsilon: Noise amplitude as a rational string.
        degree: Highest monomial degree perturbed (constants never are).
        trials: Number of perturbed systems.
        seed: Master seed.
        verdicts: Overall verdict per trial.
        points: Fixed sample points the condition was checked at.
    """

    condition: Condition
    epsilon: str
    degree: int
    trials: int
    seed: int
    verdicts: list[Verdict]
    points: list[dict[str, Any]]

    @property
    def passes(self) -> int:
        return sum(v == Verdict.PASS for v in self.verdicts)

    @property
    def fraction(self) -> float:
        return self.passes / self.trials if self.trials else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "condition": str(self.condition),
            "epsilon": self.epsilon,
            "degree": self.degree,
            "trials": self.trials,
            "seed": self.seed,
            "passes": self.passes,
            "fraction": self.fraction,
            "verdicts": [str(v) for v in self.verdicts],
            "points": self.points,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GenericityReport:
        return cls(
            condition=Condition(data["condition"]),
            epsilon=data["epsilon"],
            degree=data["degree"],
            trials=data["trials"],
            seed=data["seed"],
            verdicts=[Verdict(v) for v in data["verdicts"]],
            points=data.get("points", []),
        )


@dataclass(eq=False)
class SimulationResult:
    """Mean/covariance trajectory of the statistical linearization.

    Attributes:
        method: ``"rk4"`` or ``"closedform"``.
        times: Grid times, shape ``(K+1,)``.
        m: Mean trajectory, shape ``(K+1, n)``.
        P: Covariance trajectory, shape ``(K+1, n, n)``, symmetric.
        pd: Positive-definiteness flag per stored step.
        diagnostic: Why the trajectory was truncated, or None.
    """

    method: str
    times: np.ndarray
    m: np.ndarray
    P: np.ndarray
    pd: np.ndarray
    diagnostic: str | None = None

    @property
    def truncated(self) -> bool:
        return self.diagnostic is not None

    def to_dict(self) -> dict[str, Any]:
        """Summary of the final state (the trajectory goes to CSV)."""
        return {
            "method": self.method,
            "steps": int(self.times.size - 1),
            "t_final": float(self.times[-1]),
            "m_final": [float(v) for v in self.m[-1]],
            "P_final": [[float(v) for v in row] for row in self.P[-1]],
            "min_eigenvalue_final": float(np.linalg.eigvalsh(self.P[-1]).min()),
            "pd_everywhere": bool(self.pd.all()),
            "diagnostic": self.diagnostic,
        }


@dataclass(eq=False)
class MonteCarloEstimate:
    """Sample moments of Euler-Maruyama paths at recorded grid times.

    Attributes:
        times: Recorded times, shape ``(R,)``.
        mean: Sample means, shape ``(R, n)``.
        cov: Sample covariances, shape ``(R, n, n)``.
        mean_se: Standard errors of the means.
        cov_se: Standard errors of the covariance entries.
        paths: Paths that stayed bounded and were used.
        excluded: Paths dropped after blowing up.
        seed: Master seed.
    """

    times: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    mean_se: np.ndarray
    cov_se: np.ndarray
    paths: int
    excluded: int
    seed: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": "mc",
            "t_final": float(self.times[-1]),
            "paths": self.paths,
            "excluded": self.excluded,
            "seed": self.seed,
            "mean_final": [float(v) for v in self.mean[-1]],
            "cov_final": [[float(v) for v in row] for row in self.cov[-1]],
            "mean_se_final": [float(v) for v in self.mean_se[-1]],
            "cov_se_final": [[float(v) for v in row] for row in self.cov_se[-1]],
        }


@dataclass
class AccessibilityProbe:
    """Numerical rank of the endpoint map under control perturbations.

    Attributes:
        rank: Numerical rank of the finite-difference endpoint Jacobian.
        target: Lifted dimension N.
        singular_values: Singular values, largest first.
        n_directions: Random control directions tried.
        h: Finite-difference step.
        conclusive: False when some perturbed integration blew up.
        diagnostic: Reason for an inconclusive probe.
    """

    rank: int
    target: int
    singular_values: list[float]
    n_directions: int
    h: float
    conclusive: bool = True
    diagnostic: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "rank": self.rank,
            "target": self.target,
            "singular_values": self.singular_values,
            "n_directions": self.n_directions,
            "h": self.h,
            "conclusive": self.conclusive,
            "diagnostic": self.diagnostic,
        }
