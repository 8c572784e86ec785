"""Control-affine SDE systems with polynomial coefficients.

``dx = (f0(x) + sum_i u_i f_i(x)) dt + g(x) dW`` on R^n with ``W`` a
``d``-dimensional Wiener process.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from statlin_access.lift import LiftedField, lift_control, lift_drift, lifted_dimension
from statlin_access.vf_algebra import DimensionError, PolyMatrixMap, PolyVectorField


@dataclass(frozen=True)
class ControlAffineSystem:
    """Polynomial control-affine system.

    Attributes:
        fields: Drift ``f0`` followed by the control fields ``f1 … f_{m_u}``.
        diffusion: ``n x d`` polynomial diffusion map ``g``.
    """

    fields: tuple[PolyVectorField, ...]
    diffusion: PolyMatrixMap

    def __post_init__(self) -> None:
        if not self.fields:
            raise DimensionError("a system needs at least a drift field")
        n = self.fields[0].dim
        for k, f in enumerate(self.fields):
            if f.dim != n:
                raise DimensionError(f"field f{k} has dimension {f.dim}, expected {n}")
        if self.diffusion.rows != n or self.diffusion.num_vars != n:
            raise DimensionError(
                f"diffusion is {self.diffusion.rows}x{self.diffusion.cols} in "
                f"{self.diffusion.num_vars} variables, expected {n} rows in {n} variables"
            )

    @property
    def n(self) -> int:
        return self.fields[0].dim

    @property
    def m_u(self) -> int:
        return len(self.fields) - 1

    @property
    def d(self) -> int:
        return self.diffusion.cols

    @property
    def lifted_dim(self) -> int:
        return lifted_dimension(self.n)

    @property
    def drift(self) -> PolyVectorField:
        return self.fields[0]

    @property
    def controls(self) -> tuple[PolyVectorField, ...]:
        return self.fields[1:]

    def lifted_family(self) -> list[LiftedField]:
        """``F_{f0,g}`` followed by the flat lifts of the control fields."""
        return [lift_drift(self.drift, self.diffusion)] + [lift_control(f) for f in self.controls]

    def flat_family(self) -> list[LiftedField]:
        """All fields lifted with ``B = 0`` (the diffusion-free family)."""
        return [lift_control(f) for f in self.fields]

    def with_fields(self, fields: Sequence[PolyVectorField]) -> ControlAffineSystem:
        return ControlAffineSystem(tuple(fields), self.diffusion)

    # Numeric evaluation for the simulators. Arrays carry a leading batch shape.

    @cached_property
    def _jacobians(self) -> tuple[PolyMatrixMap, ...]:
        return tuple(f.jacobian_map for f in self.fields)

    def _check_control(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.size != self.m_u:
            raise DimensionError(f"control has {u.size} components, expected {self.m_u}")
        return u

    def vector_field(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """``f0(x) + sum_i u_i f_i(x)`` for ``x`` of shape ``(..., n)``."""
        u = self._check_control(u)
        out = self.drift.numeric(x)
        for ui, f in zip(u, self.controls):
            if ui != 0.0:
                out = out + ui * f.numeric(x)
        return out

    def vector_field_jacobian(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Jacobian of :meth:`vector_field` in ``x``, shape ``(..., n, n)``."""
        u = self._check_control(u)
        out = self._jacobians[0].numeric(x)
        for ui, jac in zip(u, self._jacobians[1:]):
            if ui != 0.0:
                out = out + ui * jac.numeric(x)
        return out

    def diffusion_at(self, x: np.ndarray) -> np.ndarray:
        """``g(x)`` with shape ``(..., n, d)``."""
        return self.diffusion.numeric(x)
