"""Helmholtz-Stokes filter with Navier slip walls.

Given a velocity ``v`` the filtered field ``v_bar`` and filter pressure ``pi``
solve

    -alpha^2 div D(v_bar) + v_bar + grad pi = v,    div v_bar = 0,

with the same slip closure as the flow and ``pi`` of zero mean.

The discrete stress operator ``K w = -div_h D_h(ghost_fill(w))`` satisfies

    (K w, z) = (D_h w, D_h z) + lambda/(1-lambda) (w, z)_walls

exactly, so every energy-type identity obtained by testing the filter
equation holds for the discrete solution up to solver round-off.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import modal
from .boundary import NoSlipParams, ParameterDomainError, SlipParams, ghost_fill
from .mesh import (
    GridSpec,
    ScalarField,
    VelocityField,
    boundary_inner,
    discrete_divergence,
    discrete_gradient,
    l2_inner,
    l2_norm,
    stress_divergence,
    sym_gradient,
    tensor_inner,
)

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class FilterParams:
    alpha: float
    alpha0: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterDomainError(f"alpha must be positive, got {self.alpha}")
        if self.alpha > self.alpha0:
            raise ParameterDomainError(f"alpha={self.alpha} exceeds alpha0={self.alpha0}")


@dataclass(frozen=True, eq=False)
class FilterSolution:
    v_bar: VelocityField
    pi: ScalarField
    residual_norm: float


# ---------------------------------------------------------------------------
# matrix-free pieces
# ---------------------------------------------------------------------------

def stress_operator(field: VelocityField, bc) -> VelocityField:
    """``K w = -div D(w)`` with ghosts filled for ``bc``."""
    return -stress_divergence(ghost_fill(field, bc))


def apply_filter_operator(field: VelocityField, fp: FilterParams, sp) -> VelocityField:
    """``w - alpha^2 div D(w)`` on the faces, using the ghosts carried by ``field``."""
    if not isinstance(sp, (SlipParams, NoSlipParams)):
        raise TypeError("sp must be SlipParams or NoSlipParams")
    out = field.without_ghosts() - (fp.alpha**2) * stress_divergence(field)
    return out.conform()


def energy_form(a: VelocityField, b: VelocityField, bc) -> float:
    """``(D a, D b) + lambda/(1-lambda) (a, b)_walls`` with ghosts filled for ``bc``."""
    ag, bg = ghost_fill(a, bc), ghost_fill(b, bc)
    out = tensor_inner(sym_gradient(ag), sym_gradient(bg), a.grid)
    beta = bc.boundary_weight
    if beta:
        out += beta * boundary_inner(ag, bg)
    return out


def _probe_grid(grid: GridSpec) -> GridSpec:
    return GridSpec(4, grid.ny, 4 * grid.hx)


def _saddle_apply(grid: GridSpec, alpha: float, bc):
    ny = grid.ny
    nv = 2 * ny - 1

    def apply(x):
        g = GridSpec(x.shape[0], ny, x.shape[0] * grid.hx)
        w = VelocityField.unpack(g, x[:, :nv])
        p = ScalarField(x[:, nv:], g)
        mom = w + (alpha**2) * stress_operator(w, bc) + discrete_gradient(p)
        return np.concatenate([mom.pack(), -discrete_divergence(w).values], axis=1)

    return apply, nv + ny


def _velocity_apply(grid: GridSpec, shift: float, scale: float, bc):
    """Column operator ``shift * I + scale * K`` on the packed velocity."""
    ny = grid.ny

    def apply(x):
        g = GridSpec(x.shape[0], ny, x.shape[0] * grid.hx)
        w = VelocityField.unpack(g, x)
        return (shift * w + scale * stress_operator(w, bc)).pack()

    return apply, 2 * ny - 1


def _poisson_apply(grid: GridSpec):
    ny = grid.ny

    def apply(x):
        g = GridSpec(x.shape[0], ny, x.shape[0] * grid.hx)
        return discrete_divergence(discrete_gradient(ScalarField(x, g))).values

    return apply, ny


@lru_cache(maxsize=64)
def saddle_stencil(grid: GridSpec, alpha: float, bc):
    apply, n = _saddle_apply(grid, alpha, bc)
    return modal.probe_stencil(apply, n)


@lru_cache(maxsize=64)
def velocity_stencil(grid: GridSpec, shift: float, scale: float, bc):
    apply, n = _velocity_apply(grid, shift, scale, bc)
    return modal.probe_stencil(apply, n)


@lru_cache(maxsize=16)
def poisson_stencil(grid: GridSpec):
    apply, n = _poisson_apply(grid)
    return modal.probe_stencil(apply, n)


def dump_operator_coo(grid: GridSpec, fp: FilterParams, sp, path) -> None:
    """Write the assembled saddle-point matrix as ``row col value`` lines."""
    mat = modal.assemble_sparse(saddle_stencil(grid, fp.alpha, sp), grid.nx).tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# saddle operator nx={grid.nx} ny={grid.ny} lx={float(grid.lx)!r} "
                 f"alpha={float(fp.alpha)!r} lambda={float(sp.lam)!r} shape={mat.shape[0]}x{mat.shape[1]}\n")
        for r, c, val in zip(mat.row, mat.col, mat.data):
            fh.write(f"{int(r)} {int(c)} {float(val)!r}\n")


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

class HelmholtzStokesFilter:
    """Reusable filter for one grid and one set of parameters.

    ``fit`` factorises the operator (one banded block per Fourier mode in x
    for ``backend="fourier"``, a sparse velocity factorisation plus a
    Cahouet-Chabard preconditioned Uzawa iteration for ``backend="uzawa"``);
    ``transform`` returns the filtered velocity and ``solve`` the full
    solution with pressure and residual.
    """

    def __init__(self, alpha: float = 0.1, lam: float = 0.5, nu: float = 1.0,
                 backend: str = "fourier", no_slip: bool = False):
        self.alpha = alpha
        self.lam = lam
        self.nu = nu
        self.backend = backend
        self.no_slip = no_slip

    def get_params(self, deep=True):
        return {k: getattr(self, k) for k in ("alpha", "lam", "nu", "backend", "no_slip")}

    def set_params(self, **params):
        for k, val in params.items():
            if k not in self.get_params():
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, val)
        self.__dict__.pop("grid_", None)
        return self

    @property
    def bc(self):
        return NoSlipParams(self.nu) if self.no_slip else SlipParams(self.lam, self.nu)

    def fit(self, grid: GridSpec):
        FilterParams(self.alpha, max(self.alpha, 1.0))
        bc = self.bc
        if self.backend == "fourier":
            stencil = saddle_stencil(grid, float(self.alpha), bc)
            self._solver = modal.ModalSolver(stencil, grid.nx, pin=2 * grid.ny - 1)
        elif self.backend == "uzawa":
            import scipy.sparse.linalg as spla

            vel = modal.assemble_sparse(velocity_stencil(grid, 1.0, float(self.alpha) ** 2, bc), grid.nx)
            self._a_lu = spla.splu(vel.tocsc())
            self._poisson = modal.ModalSolver(poisson_stencil(grid), grid.nx, pin=0)
        else:
            raise ValueError(f"unknown backend {self.backend!r}")
        self.grid_ = grid
        return self

    def _check_fitted(self, grid):
        if getattr(self, "grid_", None) != grid:
            self.fit(grid)

    def solve(self, v: VelocityField) -> FilterSolution:
        grid = v.grid
        self._check_fitted(grid)
        if not v.is_finite():
            raise ValueError("input velocity contains non-finite values")
        v = v.without_ghosts().conform()
        if self.backend == "fourier":
            rhs = np.concatenate([v.pack(), np.zeros((grid.nx, grid.ny))], axis=1)
            x = self._solver.solve(rhs)
            nv = 2 * grid.ny - 1
            v_bar = VelocityField.unpack(grid, x[:, :nv])
            pi = ScalarField(x[:, nv:], grid).remove_mean()
        else:
            v_bar, pi = self._solve_uzawa(v)
        res = filter_residual(v, v_bar, pi, self.alpha, self.bc)
        if not res <= RESIDUAL_TOL:
            raise modal.SolverConvergenceError(
                f"filter residual {res:.3e} above tolerance {RESIDUAL_TOL:g}", residual=res
            )
        return FilterSolution(v_bar, pi, res)

    def _solve_uzawa(self, v):
        grid = v.grid
        shape = (grid.nx, 2 * grid.ny - 1)
        a2 = float(self.alpha) ** 2

        def a_solve(packed):
            return self._a_lu.solve(np.asarray(packed).ravel()).reshape(shape)

        def div(packed):
            return discrete_divergence(VelocityField.unpack(grid, packed)).values

        def grad(p):
            return discrete_gradient(ScalarField(p, grid)).pack()

        def precond(r):
            # Cahouet-Chabard: (-Laplacian)^{-1} + (alpha^2/2) I
            lap_inv = -self._poisson.solve(r - r.mean())
            return lap_inv + 0.5 * a2 * r

        u, p, _ = modal.uzawa_cg(a_solve, div, grad, v.pack(), precond)
        return VelocityField.unpack(grid, u), ScalarField(p, grid).remove_mean()

    def transform(self, v: VelocityField) -> VelocityField:
        return self.solve(v).v_bar


def filter_residual(v, v_bar, pi, alpha, bc) -> float:
    """Relative residual of the discrete saddle-point system."""
    mom = v_bar + (alpha**2) * stress_operator(v_bar, bc) + discrete_gradient(pi) - v
    scale = max(np.max(np.abs(v.pack())), 1e-300)
    div = np.max(np.abs(discrete_divergence(v_bar).values))
    num = max(np.max(np.abs(mom.pack())), div)
    return float(num / scale) if np.any(v.pack()) else float(num)


@lru_cache(maxsize=32)
def _cached_filter(grid, alpha, bc, backend):
    f = HelmholtzStokesFilter(alpha, bc.lam if not bc.is_no_slip else 0.0, bc.nu, backend,
                              no_slip=bc.is_no_slip)
    return f.fit(grid)


def solve_filter(v: VelocityField, fp: FilterParams, sp, backend: str = "fourier") -> FilterSolution:
    return _cached_filter(v.grid, float(fp.alpha), sp, backend).solve(v)


# ---------------------------------------------------------------------------
# checkable estimates
# ---------------------------------------------------------------------------

def filter_contraction_check(v: VelocityField, fs: FilterSolution) -> float:
    """``||v|| - ||v_bar||``; non-negative for an exact filter."""
    return l2_norm(v) - l2_norm(fs.v_bar)


def filter_distance(v: VelocityField, fs: FilterSolution) -> float:
    return l2_norm(v.without_ghosts() - fs.v_bar)


def distance_bound_terms(v: VelocityField, fs: FilterSolution, fp: FilterParams, sp):
    """Left and right sides of the filter-distance inequality."""
    a2 = fp.alpha**2
    e = v.without_ghosts().conform() - fs.v_bar
    beta = sp.boundary_weight
    eg = ghost_fill(e, sp)
    vg = ghost_fill(v, sp)
    de = sym_gradient(eg)
    dv = sym_gradient(vg)
    lhs = a2 * tensor_inner(de, de, v.grid) + 2.0 * l2_inner(e, e)
    rhs = a2 * tensor_inner(dv, dv, v.grid)
    if beta:
        lhs += a2 * beta * boundary_inner(eg, eg)
        rhs += a2 * beta * boundary_inner(vg, vg)
    return lhs, rhs


def distance_bound_check(v: VelocityField, fs: FilterSolution, fp: FilterParams, sp) -> float:
    """Slack ``RHS - LHS`` of the filter-distance inequality."""
    lhs, rhs = distance_bound_terms(v, fs, fp, sp)
    return rhs - lhs


def filter_energy_identity_residual(v: VelocityField, fs: FilterSolution, fp: FilterParams, sp) -> float:
    """Relative defect of ``alpha^2 a(v_bar, v_bar) + ||v_bar||^2 = (v, v_bar)``."""
    vb = fs.v_bar
    lhs = fp.alpha**2 * energy_form(vb, vb, sp) + l2_inner(vb, vb)
    rhs = l2_inner(v.without_ghosts(), vb)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale


def filter_symmetry_residual(v: VelocityField, w: VelocityField, fp: FilterParams, sp,
                             backend: str = "fourier") -> float:
    """Relative defect of ``(F v, w) = (v, F w)`` for the filter map ``F``."""
    fv = solve_filter(v, fp, sp, backend).v_bar
    fw = solve_filter(w, fp, sp, backend).v_bar
    a = l2_inner(fv, w.without_ghosts())
    b = l2_inner(v.without_ghosts(), fw)
    scale = max(l2_norm(v) * l2_norm(w), 1e-300)
    return abs(a - b) / scale
