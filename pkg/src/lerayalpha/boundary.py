"""Navier slip walls realised through one ghost row of tangential velocity.

On a flat wall with ``v . n = 0`` the tangential stress reduces to
``(1/2) du/dn``, so the slip condition reads

    lambda * u + (1 - lambda) * (1/2) * du/dn = 0.

The wall value is the mean of the ghost and the first interior row and the
normal derivative is their difference over ``hy``; both are centred on the
wall, so the closure is second order. It gives ``ghost = c * u_adjacent``
with ``c = (1 - lambda - lambda*hy) / (1 - lambda + lambda*hy)``; ``lambda = 0``
is the mirror (perfect slip) and ``c = -1`` the no-slip clamp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import VelocityField, wall_trace


class ParameterDomainError(ValueError):
    pass


@dataclass(frozen=True)
class SlipParams:
    lam: float
    nu: float

    def __post_init__(self):
        if not (0.0 <= self.lam < 1.0) or not math.isfinite(self.lam):
            raise ParameterDomainError(f"lambda must be in [0,1), got {self.lam}")
        if not self.nu > 0 or not math.isfinite(self.nu):
            raise ParameterDomainError(f"nu must be positive, got {self.nu}")

    @property
    def boundary_weight(self) -> float:
        """lambda / (1 - lambda), the coefficient of the wall term in the weak form."""
        return self.lam / (1.0 - self.lam)

    @property
    def slip_length(self) -> float:
        return slip_length(self.lam)

    def ghost_ratio(self, hy: float) -> float:
        lam = self.lam
        return (1.0 - lam - lam * hy) / (1.0 - lam + lam * hy)

    @property
    def is_no_slip(self) -> bool:
        return False


@dataclass(frozen=True)
class NoSlipParams:
    """Homogeneous Dirichlet walls, the lambda -> 1 reference."""

    nu: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ParameterDomainError(f"nu must be positive, got {self.nu}")

    boundary_weight = 0.0
    lam = 1.0
    slip_length = 0.0

    def ghost_ratio(self, hy: float) -> float:
        return -1.0

    @property
    def is_no_slip(self) -> bool:
        return True


def slip_length(lam: float) -> float:
    """Robin slip length ``(1 - lambda) / (2 lambda)``; infinite for perfect slip."""
    if not 0.0 <= lam <= 1.0:
        raise ParameterDomainError(f"lambda must be in [0,1], got {lam}")
    if lam == 0.0:
        return math.inf
    return (1.0 - lam) / (2.0 * lam)


def _with_ratio(field: VelocityField, c: float) -> VelocityField:
    return VelocityField(field.u, field.v, field.grid).conform().with_ghosts(
        c * field.u[:, 0], c * field.u[:, -1]
    )


def ghost_fill(field: VelocityField, params) -> VelocityField:
    """Return a copy with impermeable walls and slip-consistent ghost rows.

    Interior samples are passed through untouched.
    """
    if not isinstance(params, (SlipParams, NoSlipParams)):
        raise TypeError("params must be SlipParams or NoSlipParams")
    return _with_ratio(field, params.ghost_ratio(field.grid.hy))


def dirichlet_clamp(field: VelocityField) -> VelocityField:
    """Anti-mirror ghosts: zero tangential velocity on both walls."""
    return _with_ratio(field, -1.0)


def robin_residual(field: VelocityField, params) -> float:
    """max over wall nodes of |lambda u + (1-lambda) (1/2) du/dn|."""
    lo_trace, hi_trace = wall_trace(field)
    lo, hi = field.ghosts
    hy = field.grid.hy
    dn_lo = (lo - field.u[:, 0]) / hy  # outward normal is -y
    dn_hi = (hi - field.u[:, -1]) / hy
    lam = params.lam
    r_lo = lam * lo_trace + (1.0 - lam) * 0.5 * dn_lo
    r_hi = lam * hi_trace + (1.0 - lam) * 0.5 * dn_hi
    return float(max(np.max(np.abs(r_lo)), np.max(np.abs(r_hi))))
