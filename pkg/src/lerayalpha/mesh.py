"""Staggered (MAC) grid for a periodic channel and its discrete operators.

Layout, with ``y_j = -1 + j*hy``:

* ``u[i, j]`` lives on x-faces at ``(i*hx, y_j + hy/2)``, shape ``(nx, ny)``;
* ``v[i, j]`` lives on y-faces at ``((i+1/2)*hx, y_j)``, shape ``(nx, ny+1)``;
  rows ``j = 0`` and ``j = ny`` sit on the walls;
* scalars live at cell centres ``((i+1/2)*hx, y_j + hy/2)``, shape ``(nx, ny)``;
* the shear component of the symmetric gradient lives on nodes
  ``(i*hx, y_j)``, shape ``(nx, ny+1)``.

The x direction is periodic. Tangential velocity at the walls is reached
through one ghost row of ``u`` below and above the channel; ghost rows are
produced by :mod:`lerayalpha.boundary` and carried on the field.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace
from typing import Optional, Tuple

import numpy as np


class GridMismatchError(ValueError):
    pass


class GhostsNotFilledError(RuntimeError):
    """Raised when an operator needing wall ghosts gets a field without them."""


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    lx: float = 2.0
    ly: float = 2.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("nx and ny must be integers")
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.nx}x{self.ny}")
        if not self.lx > 0:
            raise ValueError("lx must be positive")
        if self.ly != 2.0:
            raise ValueError("channel height is fixed to 2 (walls at y = -1 and y = +1)")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    # coordinates ---------------------------------------------------------
    def x_faces(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    def y_nodes(self) -> np.ndarray:
        return -1.0 + np.arange(self.ny + 1) * self.hy

    def y_centers(self) -> np.ndarray:
        return -1.0 + (np.arange(self.ny) + 0.5) * self.hy

    def u_coords(self):
        return np.meshgrid(self.x_faces(), self.y_centers(), indexing="ij")

    def v_coords(self):
        return np.meshgrid(self.x_centers(), self.y_nodes(), indexing="ij")

    def center_coords(self):
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="ij")

    def node_coords(self):
        return np.meshgrid(self.x_faces(), self.y_nodes(), indexing="ij")

    def node_weights(self) -> np.ndarray:
        """Midpoint weights (per unit hx*hy) of the node rows; wall rows get 1/2."""
        w = np.ones(self.ny + 1)
        w[0] = w[-1] = 0.5
        return w


@dataclass(frozen=True, eq=False)
class VelocityField:
    u: np.ndarray
    v: np.ndarray
    grid: GridSpec
    ghosts: Optional[Tuple[np.ndarray, np.ndarray]] = dc_field(default=None)

    def __post_init__(self):
        g = self.grid
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != (g.nx, g.ny):
            raise GridMismatchError(f"u has shape {u.shape}, expected {(g.nx, g.ny)}")
        if v.shape != (g.nx, g.ny + 1):
            raise GridMismatchError(f"v has shape {v.shape}, expected {(g.nx, g.ny + 1)}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        if self.ghosts is not None:
            lo, hi = (np.asarray(a, dtype=float) for a in self.ghosts)
            if lo.shape != (g.nx,) or hi.shape != (g.nx,):
                raise GridMismatchError("ghost rows must have length nx")
            object.__setattr__(self, "ghosts", (lo, hi))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VelocityField":
        return cls(np.zeros((grid.nx, grid.ny)), np.zeros((grid.nx, grid.ny + 1)), grid)

    @classmethod
    def uniform(cls, grid: GridSpec, ux: float, vy: float = 0.0) -> "VelocityField":
        v = np.full((grid.nx, grid.ny + 1), float(vy))
        return cls(np.full((grid.nx, grid.ny), float(ux)), v, grid)

    @classmethod
    def from_functions(cls, grid: GridSpec, fu, fv) -> "VelocityField":
        """Sample ``fu(x, y)`` and ``fv(x, y)`` at the face locations."""
        xu, yu = grid.u_coords()
        xv, yv = grid.v_coords()
        u = np.broadcast_to(fu(xu, yu), xu.shape).astype(float)
        v = np.broadcast_to(fv(xv, yv), xv.shape).astype(float)
        return cls(u, v, grid)

    @property
    def has_ghosts(self) -> bool:
        return self.ghosts is not None

    def with_ghosts(self, lo, hi) -> "VelocityField":
        return replace(self, ghosts=(lo, hi))

    def without_ghosts(self) -> "VelocityField":
        return replace(self, ghosts=None)

    def u_extended(self) -> np.ndarray:
        """``u`` with the ghost rows attached, shape ``(nx, ny+2)``."""
        if self.ghosts is None:
            raise GhostsNotFilledError("field has no ghost rows; call boundary.ghost_fill first")
        lo, hi = self.ghosts
        return np.concatenate([lo[:, None], self.u, hi[:, None]], axis=1)

    # value semantics -----------------------------------------------------
    def copy(self) -> "VelocityField":
        gh = None if self.ghosts is None else (self.ghosts[0].copy(), self.ghosts[1].copy())
        return VelocityField(self.u.copy(), self.v.copy(), self.grid, gh)

    def _combine(self, other, op):
        _check_same_grid(self, other)
        return VelocityField(op(self.u, other.u), op(self.v, other.v), self.grid)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        return VelocityField(c * self.u, c * self.v, self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))

    def is_boundary_conformed(self) -> bool:
        return bool(np.all(self.v[:, 0] == 0.0) and np.all(self.v[:, -1] == 0.0))

    def conform(self) -> "VelocityField":
        """Zero the wall rows of ``v`` (impermeable walls)."""
        v = self.v.copy()
        v[:, 0] = 0.0
        v[:, -1] = 0.0
        return VelocityField(self.u, v, self.grid, self.ghosts)

    # packing of the unknowns (all u, interior v rows) ----------------------
    def pack(self) -> np.ndarray:
        return np.concatenate([self.u, self.v[:, 1:-1]], axis=1)

    @classmethod
    def unpack(cls, grid: GridSpec, packed: np.ndarray) -> "VelocityField":
        packed = np.asarray(packed)
        u = packed[:, : grid.ny]
        v = np.zeros((grid.nx, grid.ny + 1))
        v[:, 1:-1] = packed[:, grid.ny : 2 * grid.ny - 1]
        return cls(np.array(u, dtype=float), v, grid)


@dataclass(frozen=True, eq=False)
class ScalarField:
    values: np.ndarray
    grid: GridSpec
    mean_zero: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.nx, self.grid.ny):
            raise GridMismatchError(
                f"scalar has shape {vals.shape}, expected {(self.grid.nx, self.grid.ny)}"
            )
        object.__setattr__(self, "values", vals)
        if self.mean_zero:
            total = abs(vals.sum() * self.grid.cell_area)
            if total > 1e-12 * max(np.linalg.norm(vals), 1e-300) and total > 1e-300:
                raise ValueError("mean_zero flag set but the scalar has a non-zero mean")

    @classmethod
    def zeros(cls, grid: GridSpec, mean_zero: bool = True) -> "ScalarField":
        return cls(np.zeros((grid.nx, grid.ny)), grid, mean_zero)

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)

    def remove_mean(self) -> "ScalarField":
        vals = self.values - self.values.mean()
        # second pass trims the O(eps) remainder of the first subtraction
        vals = vals - vals.mean()
        return ScalarField(vals, self.grid, True)


@dataclass(frozen=True, eq=False)
class TensorSample:
    """Symmetric gradient on the staggered grid.

    ``d11`` and ``d22`` are cell-centred, ``d12`` is node-centred (including
    the wall rows). The off-diagonal entry is stored once.
    """

    d11: np.ndarray
    d12: np.ndarray
    d22: np.ndarray


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


# ---------------------------------------------------------------------------
# differential operators
# ---------------------------------------------------------------------------

def discrete_divergence(field: VelocityField) -> ScalarField:
    g = field.grid
    du = (np.roll(field.u, -1, axis=0) - field.u) / g.hx
    dv = (field.v[:, 1:] - field.v[:, :-1]) / g.hy
    return ScalarField(du + dv, g)


def discrete_gradient(q: ScalarField) -> VelocityField:
    """Face gradient of a cell-centred scalar; zero normal component on walls."""
    g = q.grid
    p = q.values
    gu = (p - np.roll(p, 1, axis=0)) / g.hx
    gv = np.zeros((g.nx, g.ny + 1))
    gv[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / g.hy
    return VelocityField(gu, gv, g)


def sym_gradient(field: VelocityField) -> TensorSample:
    g = field.grid
    ue = field.u_extended()
    d11 = (np.roll(field.u, -1, axis=0) - field.u) / g.hx
    d22 = (field.v[:, 1:] - field.v[:, :-1]) / g.hy
    du_dy = (ue[:, 1:] - ue[:, :-1]) / g.hy
    dv_dx = (field.v - np.roll(field.v, 1, axis=0)) / g.hx
    return TensorSample(d11, 0.5 * (du_dy + dv_dx), d22)


def stress_divergence(field: VelocityField) -> VelocityField:
    """Face samples of ``div D(v)``; wall rows of the v-component are zero."""
    g = field.grid
    d = sym_gradient(field)
    fu = (d.d11 - np.roll(d.d11, 1, axis=0)) / g.hx + (d.d12[:, 1:] - d.d12[:, :-1]) / g.hy
    fv = np.zeros((g.nx, g.ny + 1))
    fv[:, 1:-1] = (np.roll(d.d12, -1, axis=0)[:, 1:-1] - d.d12[:, 1:-1]) / g.hx + (
        d.d22[:, 1:] - d.d22[:, :-1]
    ) / g.hy
    return VelocityField(fu, fv, g)


def tensor_inner(a: TensorSample, b: TensorSample, grid: GridSpec) -> float:
    """(D_a, D_b) with midpoint weights; the shear entry counts twice."""
    w = grid.node_weights()[None, :]
    s = np.sum(a.d11 * b.d11) + np.sum(a.d22 * b.d22) + 2.0 * np.sum(w * a.d12 * b.d12)
    return float(s * grid.cell_area)


def curl_of_stream(psi: np.ndarray, grid: GridSpec) -> VelocityField:
    """Velocity ``(d psi/dy, -d psi/dx)`` from a node-based stream function.

    ``psi`` has shape ``(nx, ny+1)``; the result is discretely solenoidal to
    round-off. Walls are impermeable when ``psi`` is constant along each wall.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (grid.nx, grid.ny + 1):
        raise GridMismatchError("stream function must have shape (nx, ny+1)")
    u = (psi[:, 1:] - psi[:, :-1]) / grid.hy
    v = -(np.roll(psi, -1, axis=0) - psi) / grid.hx
    return VelocityField(u, v, grid)


def random_solenoidal(grid: GridSpec, rng: np.random.Generator, smooth: int = 0) -> VelocityField:
    """Random discretely divergence-free field with impermeable walls.

    The stream function vanishes on both walls so ``v`` is zero there.
    ``smooth`` applies that many passes of a 1-2-1 averaging to the stream
    function before taking the curl.
    """
    psi = np.zeros((grid.nx, grid.ny + 1))
    psi[:, 1:-1] = rng.standard_normal((grid.nx, grid.ny - 1))
    for _ in range(smooth):
        inner = psi.copy()
        inner = 0.5 * inner + 0.25 * (np.roll(inner, 1, 0) + np.roll(inner, -1, 0))
        inner[:, 1:-1] = 0.5 * inner[:, 1:-1] + 0.25 * (inner[:, :-2] + inner[:, 2:])
        inner[:, 0] = inner[:, -1] = 0.0
        psi = inner
    field = curl_of_stream(psi, grid).conform()
    nrm = np.sqrt(l2_inner(field, field))
    return field * (1.0 / nrm) if nrm > 0 else field


# ---------------------------------------------------------------------------
# quadratures and norms
# ---------------------------------------------------------------------------

def l2_inner(a: VelocityField, b: VelocityField) -> float:
    _check_same_grid(a, b)
    g = a.grid
    w = g.node_weights()[None, :]
    return float((np.sum(a.u * b.u) + np.sum(w * a.v * b.v)) * g.cell_area)


def l2_norm(a: VelocityField) -> float:
    return float(np.sqrt(max(l2_inner(a, a), 0.0)))


def scalar_inner(p: ScalarField, q: ScalarField) -> float:
    _check_same_grid(p, q)
    return float(np.sum(p.values * q.values) * p.grid.cell_area)


def wall_trace(field: VelocityField) -> Tuple[np.ndarray, np.ndarray]:
    """Tangential velocity on the bottom and top walls (mean of ghost and first row)."""
    lo, hi = field.ghosts if field.ghosts is not None else (None, None)
    if lo is None:
        raise GhostsNotFilledError("wall trace needs ghost rows")
    return 0.5 * (lo + field.u[:, 0]), 0.5 * (hi + field.u[:, -1])


def boundary_inner(a: VelocityField, b: VelocityField) -> float:
    _check_same_grid(a, b)
    alo, ahi = wall_trace(a)
    blo, bhi = wall_trace(b)
    # trapezoid rule on a periodic line reduces to a plain sum
    return float((np.sum(alo * blo) + np.sum(ahi * bhi)) * a.grid.hx)


def boundary_trace_l2(field: VelocityField) -> float:
    return boundary_inner(field, field)


def dissipation_norm(field: VelocityField, params) -> float:
    """2 nu ||D(v)||^2 + 2 nu lambda/(1-lambda) ||v_tau||^2 on the walls."""
    d = sym_gradient(field)
    nu = params.nu
    out = 2.0 * nu * tensor_inner(d, d, field.grid)
    beta = params.boundary_weight
    if beta:
        out += 2.0 * nu * beta * boundary_trace_l2(field)
    return out


# ---------------------------------------------------------------------------
# cell-centred reconstructions used by the local energy audit
# ---------------------------------------------------------------------------

def centered_velocity(field: VelocityField):
    uc = 0.5 * (field.u + np.roll(field.u, -1, axis=0))
    vc = 0.5 * (field.v[:, 1:] + field.v[:, :-1])
    return uc, vc


def centered_gradient_sq(field: VelocityField) -> np.ndarray:
    """|grad v|^2 at cell centres; the shear derivatives are averaged from nodes.

    Wall rows of du/dy use one-sided differences, which is adequate because
    the local energy audit only integrates against test functions supported
    away from the walls.
    """
    g = field.grid
    u, v = field.u, field.v
    dudx = (np.roll(u, -1, axis=0) - u) / g.hx
    dvdy = (v[:, 1:] - v[:, :-1]) / g.hy
    dudy_n = np.zeros((g.nx, g.ny + 1))
    dudy_n[:, 1:-1] = (u[:, 1:] - u[:, :-1]) / g.hy
    dudy_n[:, 0] = dudy_n[:, 1]
    dudy_n[:, -1] = dudy_n[:, -2]
    dvdx_n = (v - np.roll(v, 1, axis=0)) / g.hx

    def to_center(n):
        a = 0.5 * (n[:, 1:] + n[:, :-1])
        return 0.5 * (a + np.roll(a, -1, axis=0))

    return dudx**2 + dvdy**2 + to_center(dudy_n) ** 2 + to_center(dvdx_n) ** 2
