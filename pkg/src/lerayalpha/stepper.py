"""IMEX time stepping for the Leray-alpha momentum equation.

One step from ``t_n`` to ``t_n + dt``:

1. filter ``v_n`` to get the transport velocity ``v_bar_n`` (skipped when the
   filter is bypassed, which gives plain Navier-Stokes);
2. convection ``div(v_bar (x) v)`` by second-order Adams-Bashforth
   (explicit Euler on the first step);
3. Crank-Nicolson for the stress term ``2 nu div D(v)`` with the slip closure,
   lagged pressure gradient and forcing at the half step;
4. incremental pressure correction with a Neumann Poisson solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import modal
from .boundary import NoSlipParams, SlipParams
from .filter import (
    FilterParams,
    FilterSolution,
    HelmholtzStokesFilter,
    poisson_stencil,
    stress_operator,
    velocity_stencil,
)
from .mesh import (
    GridSpec,
    ScalarField,
    VelocityField,
    discrete_divergence,
    discrete_gradient,
    l2_inner,
)

DIVERGENCE_TOL = 1e-10


class CFLError(RuntimeError):
    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class StateInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    t_end: float
    cfl_max: float = 1.0
    scheme: str = "imex_cn_ab2"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl_max <= 1:
            raise ValueError("cfl_max must be in (0, 1]")
        if self.scheme != "imex_cn_ab2":
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class Forcing:
    """Body force evaluated on the faces at arbitrary times."""

    def __init__(self, fn: Optional[Callable] = None, times=None, samples=None):
        self._fn = fn
        self._times = None if times is None else np.asarray(times, dtype=float)
        self._samples = samples

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def from_functions(cls, fu, fv):
        """``fu(t, x, y)`` and ``fv(t, x, y)`` sampled on the u- and v-faces."""

        def fn(t, grid):
            return VelocityField.from_functions(grid, lambda x, y: fu(t, x, y), lambda x, y: fv(t, x, y))

        return cls(fn)

    @classmethod
    def gridded(cls, times, samples):
        """Piecewise-linear interpolation between sampled fields."""
        if len(times) != len(samples) or len(times) < 1:
            raise ValueError("times and samples must have equal, non-zero length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must increase")
        return cls(times=times, samples=list(samples))

    @property
    def is_zero(self) -> bool:
        return self._fn is None and self._samples is None

    def __call__(self, t: float, grid: GridSpec) -> VelocityField:
        if self._fn is not None:
            return self._fn(t, grid).conform()
        if self._samples is not None:
            ts = self._times
            if t <= ts[0]:
                return self._samples[0].conform()
            if t >= ts[-1]:
                return self._samples[-1].conform()
            k = int(np.searchsorted(ts, t)) - 1
            w = (t - ts[k]) / (ts[k + 1] - ts[k])
            return ((1 - w) * self._samples[k] + w * self._samples[k + 1]).conform()
        return VelocityField.zeros(grid)


@dataclass(eq=False)
class SimState:
    t: float
    v: VelocityField
    p: ScalarField
    step_index: int = 0
    conv_prev: Optional[VelocityField] = None
    filtered: Optional[FilterSolution] = dc_field(default=None, repr=False)

    def check(self, tol: float = DIVERGENCE_TOL):
        if not self.v.is_finite():
            raise StateInvariantError(f"non-finite velocity at step {self.step_index}")
        div = float(np.max(np.abs(discrete_divergence(self.v).values)))
        if div > tol:
            raise StateInvariantError(f"divergence {div:.3e} above {tol:g} at step {self.step_index}")
        if not self.v.is_boundary_conformed():
            raise StateInvariantError("wall-normal velocity is not zero")


def convective_term(v_bar: VelocityField, v: VelocityField) -> VelocityField:
    """Divergence-form ``div(v_bar (x) v)`` with centred face values.

    Control-volume mass fluxes are averages of ``v_bar`` so that they sum to
    the mean of two cell divergences; for solenoidal ``v_bar`` with
    impermeable walls the form is skew and ``(C(v_bar, v), v) = 0``.
    """
    if v_bar.grid != v.grid:
        from .mesh import GridMismatchError

        raise GridMismatchError("convective_term: grid mismatch")
    g = v.grid
    ub, vb = v_bar.u, v_bar.v
    u, w = v.u, v.v

    # u control volumes
    fx_c = 0.5 * (ub + np.roll(ub, -1, axis=0))
    p = fx_c * 0.5 * (u + np.roll(u, -1, axis=0))
    cu = (p - np.roll(p, 1, axis=0)) / g.hx
    fy_n = 0.5 * (np.roll(vb, 1, axis=0) + vb)
    uy_n = np.zeros((g.nx, g.ny + 1))
    uy_n[:, 1:-1] = 0.5 * (u[:, :-1] + u[:, 1:])
    q = fy_n * uy_n
    q[:, 0] = q[:, -1] = 0.0
    cu = cu + (q[:, 1:] - q[:, :-1]) / g.hy

    # v control volumes (interior rows)
    fx_n = 0.5 * (ub[:, :-1] + ub[:, 1:])
    vx_n = 0.5 * (np.roll(w, 1, axis=0)[:, 1:-1] + w[:, 1:-1])
    r = fx_n * vx_n
    fy_c = 0.5 * (vb[:, :-1] + vb[:, 1:])
    s = fy_c * 0.5 * (w[:, :-1] + w[:, 1:])
    cv = np.zeros((g.nx, g.ny + 1))
    cv[:, 1:-1] = (np.roll(r, -1, axis=0) - r) / g.hx + (s[:, 1:] - s[:, :-1]) / g.hy
    return VelocityField(cu, cv, g)


class LerayAlphaSolver:
    """Holds the factorised operators for one grid, parameter set and time step.

    ``fp=None`` bypasses the filter (``v_bar := v``), which is the
    Navier-Stokes reference used by the alpha -> 0 sweeps.
    """

    def __init__(self, grid: GridSpec, fp: Optional[FilterParams], bc, cfg: StepperConfig,
                 forcing: Optional[Forcing] = None, check_invariants: bool = True):
        if not isinstance(bc, (SlipParams, NoSlipParams)):
            raise TypeError("bc must be SlipParams or NoSlipParams")
        self.grid = grid
        self.fp = fp
        self.bc = bc
        self.cfg = cfg
        self.forcing = forcing if forcing is not None else Forcing.zero()
        self.check_invariants = check_invariants
        nu_dt = bc.nu * cfg.dt
        self._visc = modal.ModalSolver(velocity_stencil(grid, 1.0, float(nu_dt), bc), grid.nx)
        self._poisson = modal.ModalSolver(poisson_stencil(grid), grid.nx, pin=0)
        self._filter = None
        if fp is not None:
            self._filter = _fitted_filter(grid, float(fp.alpha), bc)

    # --- helpers ---------------------------------------------------------
    def filter_solution(self, state: SimState) -> Optional[FilterSolution]:
        if self._filter is None:
            return None
        if state.filtered is None:
            state.filtered = self._filter.solve(state.v)
        return state.filtered

    def transport_velocity(self, state: SimState) -> VelocityField:
        fs = self.filter_solution(state)
        return state.v if fs is None else fs.v_bar

    def project(self, w: VelocityField):
        """Split ``w`` into a solenoidal part and a mean-zero potential ``phi``."""
        div = discrete_divergence(w).values
        phi = self._poisson.solve(div)
        phi = ScalarField(phi, self.grid).remove_mean()
        return (w - discrete_gradient(phi)).conform(), phi

    def explicit_rhs(self, t: float, v: VelocityField, v_bar: VelocityField) -> VelocityField:
        return (self.forcing(t, self.grid) - convective_term(v_bar, v)
                - 2.0 * self.bc.nu * stress_operator(v, self.bc))

    def initial_state(self, v0: VelocityField, t0: float = 0.0) -> SimState:
        """Build the starting state with a consistent pressure.

        The pressure solves the Neumann problem obtained by projecting the
        explicit momentum right-hand side at ``t0``.
        """
        v0 = v0.without_ghosts().conform()
        state = SimState(t0, v0, ScalarField.zeros(self.grid))
        rhs = self.explicit_rhs(t0, v0, self.transport_velocity(state))
        _, phi = self.project(rhs)
        state.p = phi
        return state

    def cfl_number(self, v_bar: VelocityField) -> float:
        g = self.grid
        return self.cfg.dt * max(np.max(np.abs(v_bar.u)) / g.hx, np.max(np.abs(v_bar.v)) / g.hy)

    # --- stepping --------------------------------------------------------
    def step(self, state: SimState) -> SimState:
        g, dt, nu = self.grid, self.cfg.dt, self.bc.nu
        v = state.v
        v_bar = self.transport_velocity(state)
        cfl = self.cfl_number(v_bar)
        if cfl > self.cfg.cfl_max:
            suggested = 0.9 * dt * self.cfg.cfl_max / cfl
            raise CFLError(f"CFL {cfl:.3f} exceeds {self.cfg.cfl_max} at t={state.t:.6g}; "
                           f"try dt <= {suggested:.4g}", suggested)
        conv = convective_term(v_bar, v)
        conv_star = conv if state.conv_prev is None else 1.5 * conv - 0.5 * state.conv_prev
        f_half = self.forcing(state.t + 0.5 * dt, g)
        rhs = (v - (nu * dt) * stress_operator(v, self.bc)
               + dt * (f_half - conv_star - discrete_gradient(state.p)))
        v_star = VelocityField.unpack(g, self._visc.solve(rhs.pack()))
        v_new, phi = self.project(v_star)
        p_new = ScalarField(state.p.values + phi.values / dt, g).remove_mean()
        new = SimState(state.t + dt, v_new, p_new, state.step_index + 1, conv)
        if self.check_invariants:
            new.check()
        return new

    def run(self, state0: SimState, recorder: Optional[Callable] = None,
            n_steps: Optional[int] = None, keep: bool = True):
        """Advance to ``t_end``; returns the list of states (``[state0, ...]``).

        ``recorder(state, solver)`` is called for the initial state and after
        every step. With ``keep=False`` only the final state is retained.
        """
        n = self.cfg.n_steps if n_steps is None else n_steps
        state = state0
        traj = [state0]
        if recorder is not None:
            recorder(state0, self)
        for _ in range(n):
            state = self.step(state)
            if recorder is not None:
                recorder(state, self)
            if keep:
                traj.append(state)
            else:
                traj[-1:] = [state]
        return traj


@lru_cache(maxsize=32)
def _fitted_filter(grid, alpha, bc):
    f = HelmholtzStokesFilter(alpha, 0.0 if bc.is_no_slip else bc.lam, bc.nu, no_slip=bc.is_no_slip)
    return f.fit(grid)


_SOLVERS: dict = {}


def step(state: SimState, fp: Optional[FilterParams], sp, cfg: StepperConfig,
         f: Optional[Forcing] = None) -> SimState:
    """Functional one-step interface; operators are cached per configuration."""
    key = (state.v.grid, fp, sp, cfg, id(f) if f is not None else None)
    solver = _SOLVERS.get(key)
    if solver is None:
        if len(_SOLVERS) > 16:
            _SOLVERS.clear()
        solver = _SOLVERS[key] = LerayAlphaSolver(state.v.grid, fp, sp, cfg, f)
    return solver.step(state)


def kinetic_energy(v: VelocityField) -> float:
    return 0.5 * l2_inner(v, v)
