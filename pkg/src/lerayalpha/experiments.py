"""Parameter sweeps, paired runs and convergence-rate fits."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .boundary import NoSlipParams, SlipParams, ghost_fill
from .diagnostics import EnergyLedger, LedgerRecorder, global_energy_residual
from .filter import FilterParams
from .mesh import GridSpec, VelocityField, boundary_trace_l2, curl_of_stream, l2_norm, random_solenoidal
from .mms import ManufacturedSolution
from .stepper import Forcing, LerayAlphaSolver, StepperConfig

PASS, FAIL = "PASS", "FAIL"


class DomainError(ValueError):
    pass


class SweepRunError(RuntimeError):
    def __init__(self, message, parameter):
        super().__init__(message)
        self.parameter = parameter


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

def fit_rate(points):
    """Least-squares slope of log(error) against log(parameter), and the correlation.

    A perfectly flat series has an undefined correlation; it is reported as 1
    when the errors are exactly equal.
    """
    pts = [(float(a), float(b)) for a, b in points]
    if len(pts) < 2:
        raise DomainError("need at least two points")
    if any(a <= 0 or b <= 0 or not math.isfinite(a) or not math.isfinite(b) for a, b in pts):
        raise DomainError("rate fit needs positive finite values")
    x = np.log([a for a, _ in pts])
    y = np.log([b for _, b in pts])
    slope, _ = np.polyfit(x, y, 1)
    if np.ptp(y) == 0.0:
        return 0.0, 1.0
    corr = float(np.corrcoef(x, y)[0, 1])
    return float(slope), abs(corr)


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

def taylor_vortex(grid: GridSpec, amplitude: float = 1.0, modes: int = 1) -> VelocityField:
    """Counter-rotating vortex pair from ``psi = A sin(k x) (1 - y^2)^2``.

    Scaled so the peak velocity is about ``amplitude``.
    """
    xn, yn = grid.node_coords()
    k = 2.0 * math.pi * modes / grid.lx
    psi = amplitude / 1.5396 * np.sin(k * xn) * (1.0 - yn**2) ** 2
    return curl_of_stream(psi, grid).conform()


def initial_field(kind: str, grid: GridSpec, amplitude: float = 1.0, seed: int = 0, lam: float = 0.5):
    if kind == "zero":
        return VelocityField.zeros(grid)
    if kind == "uniform":
        return VelocityField.uniform(grid, amplitude)
    if kind == "taylor_vortex":
        return taylor_vortex(grid, amplitude)
    if kind == "random":
        return amplitude * random_solenoidal(grid, np.random.default_rng(seed), smooth=4)
    if kind == "mms":
        return ManufacturedSolution(lam=lam, amplitude=amplitude).initial_field(grid)
    if kind.startswith("file:"):
        from .persist import read_field

        v, _ = read_field(kind[5:])
        if v.grid != grid:
            raise DomainError(f"field in {kind[5:]} is on {v.grid}, expected {grid}")
        return v.conform()
    raise DomainError(f"unknown initial condition {kind!r}")


@dataclass(frozen=True)
class BaseRun:
    grid: GridSpec
    nu: float = 0.01
    t_end: float = 1.0
    dt: float = 0.01
    lam: float = 0.5
    alpha: float = 0.1
    initial: str = "taylor_vortex"
    amplitude: float = 1.0
    seed: int = 0
    cfl_max: float = 1.0
    forcing: str = "none"

    def v0(self) -> VelocityField:
        return initial_field(self.initial, self.grid, self.amplitude, self.seed, self.lam)

    def body_force(self) -> Optional[Forcing]:
        if self.forcing == "none":
            return None
        if self.forcing == "mms":
            sol = ManufacturedSolution(lam=self.lam, nu=self.nu, alpha=self.alpha,
                                       lx=self.grid.lx, amplitude=self.amplitude)
            return sol.forcing()
        raise DomainError(f"unknown forcing {self.forcing!r}")


@dataclass
class RunResult:
    times: np.ndarray
    velocities: list
    pressures: list
    ledger: EnergyLedger
    runtime: float
    bc: object
    alpha: Optional[float]

    @property
    def ledger_ok(self) -> bool:
        return self.ledger.divergence_ok() and self.ledger.distance_bound_ok() and self.ledger.finite()


def simulate(base: BaseRun, alpha: Optional[float], bc, v0: Optional[VelocityField] = None,
             forcing: Optional[Forcing] = None) -> RunResult:
    """One member run. ``alpha=None`` bypasses the filter."""
    t0 = time.perf_counter()
    fp = None if alpha is None else FilterParams(alpha, max(alpha, 1.0))
    cfg = StepperConfig(base.dt, base.t_end, base.cfl_max)
    solver = LerayAlphaSolver(base.grid, fp, bc, cfg, forcing if forcing is not None else base.body_force())
    rec = LedgerRecorder()
    state = solver.initial_state(base.v0() if v0 is None else v0)
    states = solver.run(state, recorder=rec)
    return RunResult(
        times=np.array([s.t for s in states]),
        velocities=[s.v for s in states],
        pressures=[s.p for s in states],
        ledger=rec.ledger,
        runtime=time.perf_counter() - t0,
        bc=bc,
        alpha=alpha,
    )


def l2q_distance(a: RunResult, b: RunResult) -> float:
    """L2 in space-time of the velocity difference, trapezoid over common snapshots."""
    if len(a.times) != len(b.times) or np.any(np.abs(a.times - b.times) > 1e-12):
        raise ValueError("runs do not share snapshot times")
    sq = [l2_norm(x - y) ** 2 for x, y in zip(a.velocities, b.velocities)]
    return float(math.sqrt(max(np.trapezoid(sq, a.times), 0.0)))


def pressure_distance(a: RunResult, b: RunResult, q: float = 5.0 / 3.0) -> float:
    """L^q in space-time of the pressure difference over the half-step pressures."""
    g = a.velocities[0].grid
    vals = [np.sum(np.abs(x.values - y.values) ** q) * g.cell_area
            for x, y in zip(a.pressures[1:], b.pressures[1:])]
    dt = np.diff(a.times)
    return float(np.sum(dt * np.array(vals)) ** (1.0 / q))


def _time_integral(result: RunResult, fn) -> float:
    vals = [fn(v) for v in result.velocities]
    return float(np.trapezoid(vals, result.times))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class RateReport:
    name: str
    parameter: str
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    verdict: str = FAIL
    notes: list = field(default_factory=list)
    runtimes: list = field(default_factory=list)
    ledgers: dict = field(default_factory=dict)  # member label -> EnergyLedger, not written to CSV

    def column(self, key):
        return [r[key] for r in self.rows]

    def to_csv(self) -> str:
        keys = list(self.rows[0].keys()) if self.rows else [self.parameter]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in self.rows:
            w.writerow([_fmt(r[k]) for k in keys])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"name = {self.name}", f"parameter = {self.parameter}", f"verdict = {self.verdict}"]
        for key, (slope, corr) in self.fits.items():
            lines.append(f"{key}.slope = {float(slope)!r}")
            lines.append(f"{key}.correlation = {float(corr)!r}")
        for n in self.notes:
            lines.append(f"note = {n}")
        if self.runtimes:
            lines.append(f"runtime_total_s = {sum(self.runtimes):.3f}")
        return "\n".join(lines) + "\n"


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


ZERO_ERROR = 1e-12


def _safe_fit(report: RateReport, key: str, points, scale: float = 1.0):
    """Fit over the points whose error is above round-off relative to ``scale``."""
    pos = [(a, b) for a, b in points if b > ZERO_ERROR * max(scale, 1.0)]
    if len(pos) < 3:
        report.notes.append(f"{key}: degenerate fit ({len(pos)} positive points)")
        return None
    fit = fit_rate(pos)
    report.fits[key] = fit
    return fit


def _run_all(jobs, workers: int):
    """Evaluate ``(fn, args)`` jobs, optionally in a process pool; order is preserved."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*args) for fn, args in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(fn, *args) for fn, args in jobs]
        return [f.result() for f in futs]


def _guarded(param, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # noqa: BLE001 - re-raised with the failing parameter
        raise SweepRunError(f"run failed at {param}: {exc}", param) from exc


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPlan:
    base: BaseRun
    alphas: tuple = ()
    lambdas: tuple = ()
    reference: str = "navier_ns"
    workers: int = 1

    def __post_init__(self):
        for name, vals in (("alphas", self.alphas), ("lambdas", self.lambdas)):
            if len(set(vals)) != len(vals):
                raise DomainError(f"{name} must be distinct")
        if self.reference not in ("navier_ns", "dirichlet_leray", "dirichlet_ns"):
            raise DomainError(f"unknown reference {self.reference!r}")
        if self.alphas and any(a <= 0 for a in self.alphas):
            raise DomainError("alphas must be positive")
        if self.lambdas and any(not 0 <= x < 1 for x in self.lambdas):
            raise DomainError("lambdas must lie in [0,1)")


def _data_scale(base: BaseRun) -> float:
    return l2_norm(base.v0()) * math.sqrt(base.t_end)


def sweep_alpha(plan: SweepPlan, bypass_filter: bool = False) -> RateReport:
    """Leray-alpha runs against the unfiltered run with the same slip walls.

    ``bypass_filter`` runs every member unfiltered as well, which must
    reproduce the reference exactly.
    """
    if plan.reference != "navier_ns":
        raise DomainError("alpha sweep needs the navier_ns reference")
    base = plan.base
    bc = SlipParams(base.lam, base.nu)
    jobs = [(_guarded, ("reference", simulate, base, None, bc))]
    jobs += [(_guarded, (a, simulate, base, None if bypass_filter else a, bc)) for a in plan.alphas]
    results = _run_all(jobs, plan.workers)
    ref, members = results[0], results[1:]
    report = RateReport("sweep_alpha", "alpha")
    scale = _data_scale(base)
    for a, r in zip(plan.alphas, members):
        fd = np.nan_to_num(r.ledger.column("filter_distance"))
        report.rows.append({
            "alpha": a,
            "filter_distance_l2q": math.sqrt(max(np.trapezoid(fd**2, r.times), 0.0)),
            "solution_difference_l2q": l2q_distance(r, ref),
            "pressure_difference_l53q": pressure_distance(r, ref),
            "ledger_ok": r.ledger_ok,
        })
    report.runtimes = [ref.runtime] + [r.runtime for r in members]
    report.ledgers = {"reference": ref.ledger, **{a: r.ledger for a, r in zip(plan.alphas, members)}}
    f1 = _safe_fit(report, "filter_distance", [(r["alpha"], r["filter_distance_l2q"]) for r in report.rows], scale)
    f2 = _safe_fit(report, "solution_difference", [(r["alpha"], r["solution_difference_l2q"]) for r in report.rows], scale)
    _safe_fit(report, "pressure_difference", [(r["alpha"], r["pressure_difference_l53q"]) for r in report.rows], scale)
    ok_runs = all(r["ledger_ok"] for r in report.rows) and ref.ledger.divergence_ok()
    good = f1 is not None and f2 is not None and all(s >= 0.9 and c >= 0.97 for s, c in (f1, f2))
    if f1 is None and f2 is None and ok_runs:
        report.notes.append("all errors vanish")
    report.verdict = PASS if ok_runs and (good or (f1 is None and f2 is None)) else FAIL
    return report


def sweep_lambda(plan: SweepPlan) -> RateReport:
    """Slip runs with lambda -> 1 against the no-slip run at the same alpha."""
    if plan.reference != "dirichlet_leray":
        raise DomainError("lambda sweep needs the dirichlet_leray reference")
    base = plan.base
    jobs = [(_guarded, ("reference", simulate, base, base.alpha, NoSlipParams(base.nu)))]
    jobs += [(_guarded, (lam, simulate, base, base.alpha, SlipParams(lam, base.nu))) for lam in plan.lambdas]
    results = _run_all(jobs, plan.workers)
    ref, members = results[0], results[1:]
    report = RateReport("sweep_lambda", "lambda")
    for lam, r in zip(plan.lambdas, members):
        trace = _time_integral(r, lambda v, bc=r.bc: boundary_trace_l2(ghost_fill(v, bc)))
        report.rows.append({
            "lambda": lam,
            "inverse_weight": (1.0 - lam) / lam if lam > 0 else math.inf,
            "boundary_trace_integral": trace,
            "difference_to_dirichlet_l2q": l2q_distance(r, ref),
            "ledger_ok": r.ledger_ok,
        })
    report.runtimes = [ref.runtime] + [r.runtime for r in members]
    report.ledgers = {"reference": ref.ledger, **{lam: r.ledger for lam, r in zip(plan.lambdas, members)}}
    fit = _safe_fit(report, "boundary_trace",
                    [(r["inverse_weight"], r["boundary_trace_integral"]) for r in report.rows
                     if math.isfinite(r["inverse_weight"])], _data_scale(base))
    order = sorted(report.rows, key=lambda r: r["lambda"])
    diffs = [r["difference_to_dirichlet_l2q"] for r in order]
    decreasing = all(b < a for a, b in zip(diffs, diffs[1:]))
    ok_runs = all(r["ledger_ok"] for r in report.rows) and ref.ledger_ok
    in_window = fit is not None and 0.8 <= fit[0] <= 1.2
    degenerate = fit is None and max(diffs, default=0.0) <= ZERO_ERROR * max(_data_scale(base), 1.0)
    if not decreasing and not degenerate:
        report.notes.append("difference to the no-slip run is not strictly decreasing")
    report.notes.append(f"difference_strictly_decreasing = {decreasing}")
    report.verdict = PASS if ok_runs and ((in_window and decreasing) or degenerate) else FAIL
    return report


def joint_schedule(alpha1: float, lam1: float, n: int):
    return [(alpha1 * 2.0**-j, 1.0 - (1.0 - lam1) * 2.0**-j) for j in range(n)]


def sweep_joint(plan: SweepPlan, pairs: Optional[Sequence] = None) -> RateReport:
    """Simultaneous alpha -> 0 and lambda -> 1 against unfiltered no-slip flow.

    ``pairs`` defaults to zipping ``plan.alphas`` with ``plan.lambdas``.
    """
    if plan.reference != "dirichlet_ns":
        raise DomainError("joint sweep needs the dirichlet_ns reference")
    base = plan.base
    pairs = list(pairs) if pairs is not None else list(zip(plan.alphas, plan.lambdas))
    jobs = [(_guarded, ("reference", simulate, base, None, NoSlipParams(base.nu)))]
    jobs += [(_guarded, ((a, lam), simulate, base, a, SlipParams(lam, base.nu))) for a, lam in pairs]
    results = _run_all(jobs, plan.workers)
    ref, members = results[0], results[1:]
    report = RateReport("sweep_joint", "j")
    for j, ((a, lam), r) in enumerate(zip(pairs, members)):
        report.rows.append({
            "j": j, "alpha": a, "lambda": lam,
            "difference_to_reference_l2q": l2q_distance(r, ref),
            "ledger_ok": r.ledger_ok,
        })
    report.runtimes = [ref.runtime] + [r.runtime for r in members]
    report.ledgers = {"reference": ref.ledger, **{tuple(pq): r.ledger for pq, r in zip(pairs, members)}}
    errs = [r["difference_to_reference_l2q"] for r in report.rows]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    zero = max(errs, default=0.0) <= ZERO_ERROR * max(_data_scale(base), 1.0)
    ratio = errs[-1] / errs[0] if errs and errs[0] > 0 else 0.0
    report.notes.append(f"final_over_first = {float(ratio)!r}")
    ok_runs = all(r["ledger_ok"] for r in report.rows) and ref.ledger.divergence_ok()
    report.verdict = PASS if ok_runs and (zero or (decreasing and ratio <= 0.25)) else FAIL
    return report


# ---------------------------------------------------------------------------
# continuous dependence on initial data
# ---------------------------------------------------------------------------

def perturbation_direction(grid: GridSpec, seed: int = 1) -> VelocityField:
    """Fixed smooth solenoidal direction with unit L2 norm."""
    g = random_solenoidal(grid, np.random.default_rng(seed), smooth=6)
    return g * (1.0 / l2_norm(g))


def gronwall_perturbation(base: BaseRun, delta: float, direction: Optional[VelocityField] = None,
                          alpha: Optional[float] = "base") -> dict:
    """Amplification ``sup_t ||v1 - v2|| / delta`` for ``delta`` and ``delta/2``."""
    if delta < 0:
        raise DomainError("delta must be non-negative")
    a = base.alpha if alpha == "base" else alpha
    bc = SlipParams(base.lam, base.nu)
    gdir = perturbation_direction(base.grid) if direction is None else direction
    v0 = base.v0()
    ref = simulate(base, a, bc, v0)
    out = {"delta": delta}
    if delta == 0:
        twin = simulate(base, a, bc, v0)
        identical = all(np.array_equal(x.u, y.u) and np.array_equal(x.v, y.v)
                        for x, y in zip(ref.velocities, twin.velocities))
        out.update(identical=identical, verdict=PASS if identical else FAIL)
        return out
    ratios = []
    for d in (delta, 0.5 * delta):
        pert = simulate(base, a, bc, (v0 + d * gdir).conform())
        sup = max(l2_norm(x - y) for x, y in zip(ref.velocities, pert.velocities))
        ratios.append(sup / d)
    agree = abs(ratios[0] - ratios[1]) <= 0.2 * min(ratios)
    finite = all(math.isfinite(r) for r in ratios)
    out.update(amplification=ratios[0], amplification_half=ratios[1],
               verdict=PASS if agree and finite else FAIL)
    return out


# ---------------------------------------------------------------------------
# manufactured-solution verification
# ---------------------------------------------------------------------------

def mms_error(n: int, dt: float, t_end: float = 0.5, lam: float = 0.5, nu: float = 0.05,
              alpha: float = 0.1, lx: float = 2.0):
    """L2(Q) velocity error of one manufactured run and the run itself."""
    sol = ManufacturedSolution(lam=lam, nu=nu, alpha=alpha, lx=lx)
    grid = GridSpec(n, n, lx)
    fp = FilterParams(alpha, max(alpha, 1.0)) if alpha else None
    solver = LerayAlphaSolver(grid, fp, SlipParams(lam, nu), StepperConfig(dt, t_end), sol.forcing())
    states = solver.run(solver.initial_state(sol.initial_field(grid)))
    sq = [l2_norm(s.v - sol.initial_field(grid, s.t)) ** 2 for s in states]
    times = np.array([s.t for s in states])
    return math.sqrt(np.trapezoid(sq, times)), states, solver


def mms_convergence(levels: int = 3, n0: int = 32, dt0: float = 0.01, t_end: float = 0.5,
                    temporal_grid: int = 64, temporal_dt0: float = 0.008, reference_factor: int = 16,
                    lam: float = 0.5, nu: float = 0.05, alpha: float = 0.1) -> RateReport:
    """Spatial and temporal orders from manufactured-solution runs.

    Spatial: grids ``n0 * 2^k`` with ``dt`` refined alongside ``h`` against the
    analytic field. Temporal: ``dt0 / 2^k`` on a fixed grid against a run on
    the same grid with ``dt0 / 2^(levels-1) / reference_factor``, which
    removes the (dt-independent) spatial error.
    """
    if levels < 3:
        raise DomainError("levels must be at least 3")
    report = RateReport("mms_convergence", "h")
    sp_pts = []
    for k in range(levels):
        n = n0 * 2**k
        t0 = time.perf_counter()
        err, _, _ = mms_error(n, dt0 / 2**k, t_end, lam, nu, alpha)
        h = 2.0 / n
        sp_pts.append((h, err))
        report.rows.append({"kind": "space", "n": n, "h": h, "dt": dt0 / 2**k, "error_l2q": err})
        report.runtimes.append(time.perf_counter() - t0)
    dt_ref = temporal_dt0 / 2 ** (levels - 1) / reference_factor
    _, ref_states, _ = mms_error(temporal_grid, dt_ref, t_end, lam, nu, alpha)
    tm_pts = []
    for k in range(levels):
        dt = temporal_dt0 / 2**k
        t0 = time.perf_counter()
        _, states, _ = mms_error(temporal_grid, dt, t_end, lam, nu, alpha)
        stride = int(round(dt / dt_ref))
        sq = [l2_norm(s.v - ref_states[i * stride].v) ** 2 for i, s in enumerate(states)]
        err = math.sqrt(np.trapezoid(sq, [s.t for s in states]))
        tm_pts.append((dt, err))
        report.rows.append({"kind": "time", "n": temporal_grid, "h": 2.0 / temporal_grid, "dt": dt,
                            "error_l2q": err})
        report.runtimes.append(time.perf_counter() - t0)
    fs = _safe_fit(report, "spatial", sp_pts)
    ft = _safe_fit(report, "temporal", tm_pts)
    ok = fs is not None and ft is not None and fs[0] >= 1.9 and ft[0] >= 1.9 and fs[1] >= 0.99 and ft[1] >= 0.99
    report.verdict = PASS if ok else FAIL
    return report


def energy_audit(base: BaseRun, dt_levels=(0.01, 0.005)) -> dict:
    """Global energy residual for successive dt halvings on the same base run."""
    bc = SlipParams(base.lam, base.nu)
    residuals, monotone, ok, ledgers = [], [], [], {}
    for dt in dt_levels:
        r = simulate(replace(base, dt=dt), base.alpha, bc)
        ledgers[dt] = r.ledger
        residuals.append(global_energy_residual(r.ledger))
        monotone.append(r.ledger.kinetic_non_increasing())
        ok.append(r.ledger_ok)
    ratios = [a / b if b > 0 else math.inf for a, b in zip(residuals, residuals[1:])]
    verdict = PASS if all(q >= 3.5 for q in ratios) and all(monotone) and all(ok) else FAIL
    return {"dt": list(dt_levels), "residual": residuals, "ratio": ratios,
            "kinetic_non_increasing": monotone, "ledger_ok": ok, "verdict": verdict,
            "ledgers": ledgers}


# ---------------------------------------------------------------------------
# filter property suite
# ---------------------------------------------------------------------------

def filter_properties(grid: GridSpec, n_fields: int = 100, alphas=(0.05, 0.2, 1.0),
                      lambdas=(0.0, 0.5, 0.9), seed: int = 0, nu: float = 1.0,
                      tol_contraction: float = 1e-12, tol_bound: float = 1e-10,
                      tol_identity: float = 1e-10) -> RateReport:
    """Contraction, filter-distance bound, energy identity and symmetry on seeded random fields.

    Slacks are reported relative to the natural scale of each check, so a
    non-negative value (or a residual below tolerance) is a pass.
    """
    from .filter import (filter_contraction_check, filter_energy_identity_residual,
                         filter_symmetry_residual, distance_bound_terms, solve_filter)

    rng = np.random.default_rng(seed)
    fields = [random_solenoidal(grid, rng, smooth=i % 4) for i in range(n_fields + 1)]
    report = RateReport("filter_properties", "field")
    worst = {"contraction": math.inf, "distance_bound": math.inf, "identity": 0.0, "symmetry": 0.0}
    for lam in lambdas:
        sp = SlipParams(lam, nu)
        for a in alphas:
            fp = FilterParams(a, max(a, 1.0))
            for i in range(n_fields):
                v, w = fields[i], fields[i + 1]
                fs = solve_filter(v, fp, sp)
                c = filter_contraction_check(v, fs) / l2_norm(v)
                lhs, rhs = distance_bound_terms(v, fs, fp, sp)
                l41 = (rhs - lhs) / max(abs(lhs), abs(rhs), 1e-300)
                e = filter_energy_identity_residual(v, fs, fp, sp)
                sym = filter_symmetry_residual(v, w, fp, sp)
                worst["contraction"] = min(worst["contraction"], c)
                worst["distance_bound"] = min(worst["distance_bound"], l41)
                worst["identity"] = max(worst["identity"], e)
                worst["symmetry"] = max(worst["symmetry"], sym)
                report.rows.append({"field": i, "alpha": a, "lambda": lam, "contraction_slack": c,
                                    "distance_bound_slack": l41, "energy_identity_residual": e,
                                    "symmetry_residual": sym})
    for k, val in worst.items():
        report.notes.append(f"worst_{k} = {float(val)!r}")
    ok = (worst["contraction"] >= -tol_contraction and worst["distance_bound"] >= -tol_bound
          and worst["identity"] <= tol_identity and worst["symmetry"] <= tol_identity)
    report.verdict = PASS if ok else FAIL
    return report
