"""Energy bookkeeping and local energy audits on recorded trajectories."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .boundary import ghost_fill, robin_residual
from .filter import distance_bound_terms
from .mesh import (
    GridSpec,
    VelocityField,
    boundary_trace_l2,
    centered_gradient_sq,
    centered_velocity,
    discrete_divergence,
    l2_inner,
    l2_norm,
    sym_gradient,
    tensor_inner,
)

LEDGER_COLUMNS = (
    "t",
    "kinetic",
    "dissipation",
    "boundary",
    "forcing_power",
    "filter_distance",
    "distance_bound_slack",
    "distance_bound_scale",
    "divergence_max",
    "robin_residual",
)

DISTANCE_BOUND_REL_TOL = 1e-10


class EmptyLedgerError(ValueError):
    pass


class SupportError(ValueError):
    pass


@dataclass
class EnergyLedger:
    rows: list

    def __init__(self, rows=None):
        self.rows = list(rows or [])

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS)
        for r in self.rows:
            w.writerow([repr(float(r[c])) for c in LEDGER_COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EnergyLedger":
        rd = csv.reader(io.StringIO(text))
        header = next(rd)
        if tuple(header) != LEDGER_COLUMNS:
            raise ValueError(f"unexpected ledger header {header}")
        return cls([{c: float(x) for c, x in zip(header, row)} for row in rd if row])

    def distance_bound_ok(self, rel_tol: float = DISTANCE_BOUND_REL_TOL) -> bool:
        slack, scale = self.column("distance_bound_slack"), self.column("distance_bound_scale")
        return bool(np.all(slack >= -rel_tol * np.maximum(scale, 1e-300)))

    def divergence_ok(self, tol: float = 1e-10) -> bool:
        return bool(np.all(self.column("divergence_max") <= tol))

    def finite(self) -> bool:
        return all(math.isfinite(r[c]) for r in self.rows for c in LEDGER_COLUMNS)

    def kinetic_non_increasing(self, rel_tol: float = 1e-12) -> bool:
        k = self.column("kinetic")
        return bool(np.all(np.diff(k) <= rel_tol * np.maximum(k[:-1], 1e-300)))


def ledger_row(state, solver) -> dict:
    """Every term of the energy balance and of the filter-distance bound at one time."""
    v = state.v
    bc = solver.bc
    g = v.grid
    vg = ghost_fill(v, bc)
    d = sym_gradient(vg)
    nu = bc.nu
    beta = bc.boundary_weight
    f = solver.forcing(state.t, g)
    row = {
        "t": state.t,
        "kinetic": 0.5 * l2_inner(v, v),
        "dissipation": 2.0 * nu * tensor_inner(d, d, g),
        "boundary": 2.0 * nu * beta * boundary_trace_l2(vg) if beta else 0.0,
        "forcing_power": l2_inner(f, v),
        "divergence_max": float(np.max(np.abs(discrete_divergence(v).values))),
        "robin_residual": 0.0 if bc.is_no_slip else robin_residual(vg, bc),
    }
    fs = solver.filter_solution(state)
    if fs is None:
        row.update(filter_distance=0.0, distance_bound_slack=0.0, distance_bound_scale=0.0)
    else:
        lhs, rhs = distance_bound_terms(v, fs, solver.fp, bc)
        row.update(
            filter_distance=l2_norm(v - fs.v_bar),
            distance_bound_slack=rhs - lhs,
            distance_bound_scale=max(abs(lhs), abs(rhs)),
        )
    return row


class LedgerRecorder:
    """Run-loop callback appending one ledger row per recorded state."""

    def __init__(self, ledger: Optional[EnergyLedger] = None):
        self.ledger = ledger if ledger is not None else EnergyLedger()

    def __call__(self, state, solver):
        self.ledger.rows.append(ledger_row(state, solver))


def global_energy_residual(ledger: EnergyLedger) -> float:
    """|KE(T) - KE(0) + int (dissipation + boundary - forcing_power) dt|, trapezoid in time."""
    if len(ledger) == 0:
        raise EmptyLedgerError("ledger has no rows")
    t = ledger.column("t")
    k = ledger.column("kinetic")
    rate = ledger.column("dissipation") + ledger.column("boundary") - ledger.column("forcing_power")
    integral = float(np.trapezoid(rate, t)) if len(t) > 1 else 0.0
    return abs(k[-1] - k[0] + integral)


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

def _bump(s):
    """(1 - s^2)^4 on |s| < 1 and its first two derivatives."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 0.0)
    b0 = q**4
    b1 = -8.0 * s * q**3
    b2 = -8.0 * q**3 + 48.0 * s * s * q**2
    return b0, b1, b2


@dataclass(frozen=True)
class TestFunction:
    """``phi(t, x, y) = theta(t) * bump_x(x) * bump_y(y)``.

    ``time_kind`` selects ``theta``: ``"constant"`` (theta = 1),
    ``"window"`` (a bump supported in ``(t_center - t_radius, t_center + t_radius)``)
    or ``"ramp"`` (equal to one at t = 0, decaying smoothly to zero at
    ``t_radius``). ``"global"`` marks a constant function on the whole domain,
    which is rejected by the support check.
    """

    __test__ = False  # not a pytest class

    x_center: float = 1.0
    y_center: float = 0.0
    x_radius: float = 0.6
    y_radius: float = 0.6
    time_kind: str = "constant"
    t_center: float = 0.5
    t_radius: float = 0.5
    spatial_kind: str = "bump"

    @classmethod
    def space_time_bump(cls, t_end: float, **kw):
        return cls(time_kind="window", t_center=0.5 * t_end, t_radius=0.5 * t_end, **kw)

    @classmethod
    def spatial_bump(cls, **kw):
        return cls(time_kind="constant", **kw)

    @classmethod
    def ramped_bump(cls, t_end: float, **kw):
        return cls(time_kind="ramp", t_radius=1.5 * t_end, **kw)

    @classmethod
    def constant(cls):
        return cls(spatial_kind="global")

    def check_support(self, grid: GridSpec):
        h = 2.0 * max(grid.hx, grid.hy)
        if self.spatial_kind == "global":
            raise SupportError("test function support covers the walls")
        if self.y_center - self.y_radius < -1.0 + h or self.y_center + self.y_radius > 1.0 - h:
            raise SupportError("test function support is closer than two cells to a wall")
        if 2.0 * self.x_radius > grid.lx - h:
            raise SupportError("test function support wraps around the periodic direction")
        if self.x_radius <= 0 or self.y_radius <= 0:
            raise SupportError("test function radii must be positive")

    def theta(self, t):
        if self.time_kind == "constant":
            return 1.0, 0.0
        if self.time_kind == "window":
            b0, b1, _ = _bump((t - self.t_center) / self.t_radius)
            return float(b0), float(b1) / self.t_radius
        if self.time_kind == "ramp":
            b0, b1, _ = _bump(t / self.t_radius)
            return float(b0), float(b1) / self.t_radius
        raise ValueError(f"unknown time_kind {self.time_kind!r}")

    def spatial(self, x, y, lx: float):
        """phi_s, d/dx, d/dy, Laplacian; x is measured periodically."""
        if self.spatial_kind == "global":
            one = np.ones_like(np.asarray(x, dtype=float) * np.asarray(y, dtype=float))
            zero = 0.0 * one
            return one, zero, zero, zero
        dx = (np.asarray(x) - self.x_center + 0.5 * lx) % lx - 0.5 * lx
        bx0, bx1, bx2 = _bump(dx / self.x_radius)
        by0, by1, by2 = _bump((np.asarray(y) - self.y_center) / self.y_radius)
        rx, ry = self.x_radius, self.y_radius
        return (bx0 * by0, bx1 / rx * by0, bx0 * by1 / ry, bx2 / rx**2 * by0 + bx0 * by2 / ry**2)

    def evaluate(self, t, x, y, lx):
        th, dth = self.theta(t)
        s0, sx, sy, lap = self.spatial(x, y, lx)
        return {"phi": th * s0, "phi_t": dth * s0, "phi_x": th * sx, "phi_y": th * sy, "lap": th * lap}


# ---------------------------------------------------------------------------
# trajectories and the local energy balance
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    velocities: List[VelocityField]
    transports: List[VelocityField]
    pressures: list  # pressures[n] acts on the interval (t_{n-1}, t_n); entry 0 unused
    nu: float
    forcing: Callable
    grid: GridSpec

    @classmethod
    def from_states(cls, states, solver) -> "Trajectory":
        return cls(
            times=np.array([s.t for s in states]),
            velocities=[s.v for s in states],
            transports=[solver.transport_velocity(s) for s in states],
            pressures=[s.p for s in states],
            nu=solver.bc.nu,
            forcing=solver.forcing,
            grid=solver.grid,
        )

    @classmethod
    def zero(cls, grid: GridSpec, times, nu: float = 0.01) -> "Trajectory":
        from .mesh import ScalarField
        from .stepper import Forcing

        z = VelocityField.zeros(grid)
        n = len(times)
        return cls(np.asarray(times, float), [z] * n, [z] * n, [ScalarField.zeros(grid)] * n,
                   nu, Forcing.zero(), grid)


def _face_weighted(a: VelocityField, b: VelocityField, w_u, w_v) -> float:
    """sum over faces of a*b*w, each component on its own control volumes."""
    wn = a.grid.node_weights()[None, :]
    return float((np.sum(a.u * b.u * w_u) + np.sum(wn * a.v * b.v * w_v)) * a.grid.cell_area)


def _local_terms(traj: Trajectory, phi: TestFunction, transport: str):
    g = traj.grid
    xc, yc = g.center_coords()
    xu, yu = g.u_coords()
    xv, yv = g.v_coords()
    area = g.cell_area
    n = len(traj.times)
    energy = np.zeros(n)
    integrand = np.zeros(n)
    for k in range(n):
        t = traj.times[k]
        v = traj.velocities[k]
        ph = phi.evaluate(t, xc, yc, g.lx)
        phi_u = phi.evaluate(t, xu, yu, g.lx)["phi"]
        phi_v = phi.evaluate(t, xv, yv, g.lx)["phi"]
        energy[k] = 0.5 * _face_weighted(v, v, phi_u, phi_v)
        uc, vc = centered_velocity(v)
        ke = 0.5 * (uc**2 + vc**2)
        vb = traj.transports[k] if transport == "filtered" else v
        ubc, vbc = centered_velocity(vb)
        grad_sq = centered_gradient_sq(v)
        integrand[k] = area * np.sum(
            traj.nu * grad_sq * ph["phi"]
            - ke * (ph["phi_t"] + traj.nu * ph["lap"])
            - ke * (ubc * ph["phi_x"] + vbc * ph["phi_y"])
        ) - _face_weighted(traj.forcing(t, g), v, phi_u, phi_v)
    pressure = np.zeros(n)
    for k in range(1, n):
        tm = 0.5 * (traj.times[k - 1] + traj.times[k])
        ph = phi.evaluate(tm, xc, yc, g.lx)
        ua, va = centered_velocity(traj.velocities[k - 1])
        ub, vb_ = centered_velocity(traj.velocities[k])
        p = traj.pressures[k].values
        pressure[k] = area * np.sum(p * (0.5 * (ua + ub) * ph["phi_x"] + 0.5 * (va + vb_) * ph["phi_y"]))
    return energy, integrand, pressure


def local_energy_series(traj: Trajectory, phi: TestFunction, transport: str = "filtered") -> np.ndarray:
    """LHS - RHS of the local energy balance at every recorded time.

    ``transport="filtered"`` uses the filtered velocity in the kinetic-energy
    flux (Leray-alpha form); ``"velocity"`` uses ``v`` itself (Navier-Stokes).
    """
    phi.check_support(traj.grid)
    energy, integrand, pressure = _local_terms(traj, phi, transport)
    dt = np.diff(traj.times)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]))])
    cum_p = np.concatenate([[0.0], np.cumsum(dt * pressure[1:])])
    return energy - energy[0] + cum - cum_p


def local_energy_residual(traj: Trajectory, phi: TestFunction, p_series=None,
                          transport: str = "filtered") -> float:
    """Residual of the local energy balance at the final time.

    ``p_series`` optionally overrides the trajectory's pressures.
    """
    if p_series is not None:
        traj = Trajectory(traj.times, traj.velocities, traj.transports, list(p_series),
                          traj.nu, traj.forcing, traj.grid)
    return float(local_energy_series(traj, phi, transport)[-1])


def local_energy_inequality_slack(traj: Trajectory, phi: TestFunction,
                                  transport: str = "velocity") -> np.ndarray:
    """RHS - LHS of the local energy inequality at every recorded time."""
    return -local_energy_series(traj, phi, transport)
