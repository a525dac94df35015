"""Command-line entry point and run configuration.

Config files are flat ``key = value`` text with ``#`` comments. Exit codes:
0 success or PASS, 1 verdict FAIL, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import math
import platform
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
import numpy as np

from . import __version__
from .boundary import ParameterDomainError, SlipParams
from .diagnostics import LedgerRecorder, global_energy_residual
from .experiments import (
    PASS,
    BaseRun,
    DomainError,
    SweepPlan,
    SweepRunError,
    energy_audit,
    filter_properties,
    gronwall_perturbation,
    joint_schedule,
    mms_convergence,
    sweep_alpha,
    sweep_joint,
    sweep_lambda,
)
from .filter import FilterParams
from .mesh import GridSpec
from .mms import ConfigurationError
from .modal import SolverConvergenceError
from .persist import FieldFormatError, atomic_write, write_checkpoint, write_field, write_manifest, write_report
from .stepper import CFLError, LerayAlphaSolver, StateInvariantError, StepperConfig

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _int(lo):
    def conv(s):
        x = int(s)
        if x < lo:
            raise ValueError(f"must be an integer >= {lo}")
        return x
    return conv


def _pos(s):
    x = float(s)
    if not (x > 0 and math.isfinite(x)):
        raise ValueError("must be a positive number")
    return x


def _lam(s):
    x = float(s)
    if not 0.0 <= x < 1.0:
        raise ValueError("lambda must be in [0,1)")
    return x


def _cfl(s):
    x = float(s)
    if not 0.0 < x <= 1.0:
        raise ValueError("must be in (0,1]")
    return x


def _dt(s):
    return "auto" if s.strip() == "auto" else _pos(s)


def _ic(s):
    s = s.strip()
    if s in ("zero", "uniform", "taylor_vortex", "mms", "random") or (s.startswith("file:") and len(s) > 5):
        return s
    raise ValueError("must be zero, uniform, taylor_vortex, mms, random or file:<path>")


def _forcing(s):
    s = s.strip()
    if s in ("none", "mms"):
        return s
    raise ValueError("must be none or mms")


def _finite(s):
    x = float(s)
    if not math.isfinite(x):
        raise ValueError("must be a finite number")
    return x


def _text(s):
    s = s.strip()
    if not s:
        raise ValueError("must not be empty")
    return s


# key -> (field name, converter, default, domain text)
KEYS = {
    "nx": ("nx", _int(4), 64, "integer >= 4, cells along the channel"),
    "ny": ("ny", _int(4), 64, "integer >= 4, cells across the channel"),
    "lx": ("lx", _pos, 2.0, "positive, periodic channel length (height is 2)"),
    "nu": ("nu", _pos, 0.01, "positive viscosity"),
    "lambda": ("lam", _lam, 0.5, "[0,1), slip weight (0 perfect slip, towards 1 no-slip)"),
    "alpha": ("alpha", _pos, 0.1, "positive filter radius"),
    "dt": ("dt", _dt, 0.005, "positive time step, or auto (chosen from cfl and the initial field)"),
    "cfl": ("cfl", _cfl, 1.0, "(0,1], largest admissible CFL number"),
    "T": ("t_end", _pos, 1.0, "positive final time"),
    "ic": ("ic", _ic, "taylor_vortex", "zero | uniform | taylor_vortex | mms | random | file:<path>"),
    "amplitude": ("amplitude", _finite, 1.0, "finite scale of the initial field"),
    "forcing": ("forcing", _forcing, "none", "none | mms"),
    "output": ("output", _text, "out", "output directory"),
    "snapshot_every": ("snapshot_every", _int(0), 0, "integer >= 0, steps between snapshots (0 = final only)"),
    "seed": ("seed", _int(0), 0, "integer >= 0, seed for random fields"),
    "workers": ("workers", _int(1), 1, "integer >= 1, parallel sweep members"),
}


@dataclass(frozen=True)
class RunConfig:
    nx: int = 64
    ny: int = 64
    lx: float = 2.0
    nu: float = 0.01
    lam: float = 0.5
    alpha: float = 0.1
    dt: object = 0.005
    cfl: float = 1.0
    t_end: float = 1.0
    ic: str = "taylor_vortex"
    amplitude: float = 1.0
    forcing: str = "none"
    output: str = "out"
    snapshot_every: int = 0
    seed: int = 0
    workers: int = 1

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.nx, self.ny, self.lx)

    def resolved_dt(self) -> float:
        if self.dt != "auto":
            return float(self.dt)
        base = replace(self.base_run(), dt=1.0)
        v0 = base.v0()
        umax = max(float(np.max(np.abs(v0.u))), float(np.max(np.abs(v0.v))), 1e-12)
        g = self.grid
        dt = 0.5 * self.cfl * min(g.hx, g.hy) / umax
        n = max(1, math.ceil(self.t_end / dt))
        return self.t_end / n

    def base_run(self) -> BaseRun:
        dt = 1.0 if self.dt == "auto" else float(self.dt)
        return BaseRun(self.grid, nu=self.nu, t_end=self.t_end, dt=dt, lam=self.lam, alpha=self.alpha,
                       initial=self.ic, amplitude=self.amplitude, seed=self.seed, cfl_max=self.cfl,
                       forcing=self.forcing)

    def as_dict(self) -> dict:
        return {k: getattr(self, name) for k, (name, *_rest) in KEYS.items()}


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key = value`` text; unknown or repeated keys are errors."""
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: key {key!r} already set on line {seen[key]}")
        seen[key] = lineno
        name, conv, _, _ = KEYS[key]
        try:
            values[name] = conv(val)
        except ValueError as exc:
            msg = str(exc) if key == "lambda" else f"{key}: {exc}"
            raise ConfigError(f"line {lineno}: {msg}") from exc
    cfg = RunConfig(**values)
    try:
        cfg.grid
        if cfg.dt != "auto":
            StepperConfig(cfg.dt, cfg.t_end, cfg.cfl)
    except (ValueError, ParameterDomainError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def emit_config(cfg: RunConfig) -> str:
    lines = []
    for key, (name, *_rest) in KEYS.items():
        val = getattr(cfg, name)
        lines.append(f"{key} = {float(val)!r}" if isinstance(val, float) else f"{key} = {val}")
    return "\n".join(lines) + "\n"


def config_help() -> str:
    lines = ["configuration keys (flat 'key = value', '#' comments):"]
    for key, (_, _, default, domain) in KEYS.items():
        lines.append(f"  {key:<15} default {default!s:<14} {domain}")
    return "\n".join(lines)


def _load(args) -> RunConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    cfg = parse_config(text)
    if args.set:
        over = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, val = (s.strip() for s in item.split("=", 1))
            over[k] = val
        kept = [ln for ln in emit_config(cfg).splitlines() if ln.split("=", 1)[0].strip() not in over]
        cfg = parse_config("\n".join(kept + [f"{k} = {val}" for k, val in over.items()]))
    if args.out:
        cfg = replace(cfg, output=args.out)
    return cfg


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _floats(s: str):
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad number list {s!r}") from exc


def cmd_run(cfg: RunConfig, args, out: Path, manifest: dict) -> int:
    dt = cfg.resolved_dt()
    base = replace(cfg.base_run(), dt=dt)
    fp = FilterParams(cfg.alpha, max(cfg.alpha, 1.0))
    bc = SlipParams(cfg.lam, cfg.nu)
    solver = LerayAlphaSolver(base.grid, fp, bc, StepperConfig(dt, cfg.t_end, cfg.cfl), base.body_force())
    rec = LedgerRecorder()
    outputs = []

    def recorder(state, s):
        rec(state, s)
        if cfg.snapshot_every and state.step_index % cfg.snapshot_every == 0:
            outputs.append(str(write_field(out / f"snapshot_{state.step_index:06d}.txt", state.v, state.p)))

    states = solver.run(solver.initial_state(base.v0()), recorder=recorder, keep=False)
    final = states[-1]
    outputs.append(str(write_field(out / "final.txt", final.v, final.p)))
    outputs.append(str(write_checkpoint(out / "checkpoint.txt", final.v, final.p, final.t, final.step_index, dt)))
    outputs.append(str(atomic_write(out / "ledger.csv", rec.ledger.to_csv())))
    ok = rec.ledger.divergence_ok() and rec.ledger.distance_bound_ok() and rec.ledger.finite()
    manifest.update(outputs=outputs, dt=dt, steps=final.step_index,
                    global_energy_residual=global_energy_residual(rec.ledger), ledger_ok=ok)
    return EXIT_OK if ok else EXIT_FAIL


def _report_exit(report, out: Path, manifest: dict, series=None, x_key=None) -> int:
    paths = write_report(out, report, x_key, series)
    manifest.update(outputs=[str(p) for p in paths], verdict=report.verdict,
                    fits={k: list(v) for k, v in report.fits.items()}, notes=report.notes,
                    member_runtimes_s=report.runtimes)
    print(report.summary(), end="")
    return EXIT_OK if report.verdict == PASS else EXIT_FAIL


def cmd_filter_test(cfg, args, out, manifest):
    report = filter_properties(cfg.grid, args.fields, seed=cfg.seed)
    return _report_exit(report, out, manifest)


def cmd_sweep_alpha(cfg, args, out, manifest):
    plan = SweepPlan(replace(cfg.base_run(), dt=cfg.resolved_dt()), alphas=_floats(args.alphas), workers=cfg.workers)
    r = sweep_alpha(plan)
    series = {"filter_distance": list(zip(r.column("alpha"), r.column("filter_distance_l2q"))),
              "solution_difference": list(zip(r.column("alpha"), r.column("solution_difference_l2q")))}
    return _report_exit(r, out, manifest, series, "alpha")


def cmd_sweep_lambda(cfg, args, out, manifest):
    plan = SweepPlan(replace(cfg.base_run(), dt=cfg.resolved_dt()), lambdas=_floats(args.lambdas),
                     reference="dirichlet_leray", workers=cfg.workers)
    r = sweep_lambda(plan)
    series = {"boundary_trace": list(zip(r.column("inverse_weight"), r.column("boundary_trace_integral")))}
    return _report_exit(r, out, manifest, series, "(1-lambda)/lambda")


def cmd_sweep_joint(cfg, args, out, manifest):
    plan = SweepPlan(replace(cfg.base_run(), dt=cfg.resolved_dt()), reference="dirichlet_ns", workers=cfg.workers)
    r = sweep_joint(plan, joint_schedule(args.alpha1, args.lambda1, args.levels))
    series = {"difference": list(zip(r.column("alpha"), r.column("difference_to_reference_l2q")))}
    return _report_exit(r, out, manifest, series, "alpha_j")


def cmd_mms(cfg, args, out, manifest):
    r = mms_convergence(args.levels, lam=cfg.lam, nu=args.nu, alpha=cfg.alpha)
    space = [(row["h"], row["error_l2q"]) for row in r.rows if row["kind"] == "space"]
    tm = [(row["dt"], row["error_l2q"]) for row in r.rows if row["kind"] == "time"]
    return _report_exit(r, out, manifest, {"spatial": space, "temporal": tm}, "h or dt")


def cmd_energy_audit(cfg, args, out, manifest):
    dts = _floats(args.dts) if args.dts else (cfg.resolved_dt(), cfg.resolved_dt() / 2)
    res = energy_audit(cfg.base_run(), dts)
    lines = ["dt,residual,kinetic_non_increasing,ledger_ok"]
    for dt, r, m, ok in zip(res["dt"], res["residual"], res["kinetic_non_increasing"], res["ledger_ok"]):
        lines.append(f"{float(dt)!r},{float(r)!r},{str(m).lower()},{str(ok).lower()}")
    manifest.update(outputs=[str(atomic_write(out / "energy_audit.csv", "\n".join(lines) + "\n"))],
                    verdict=res["verdict"], ratio=[float(q) for q in res["ratio"]])
    print(f"verdict = {res['verdict']}\nratio = {[float(q) for q in res['ratio']]}")
    return EXIT_OK if res["verdict"] == PASS else EXIT_FAIL


def cmd_gronwall(cfg, args, out, manifest):
    base = replace(cfg.base_run(), dt=cfg.resolved_dt())
    res = gronwall_perturbation(base, args.delta)
    text = "\n".join(f"{k} = {float(v)!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in res.items()) + "\n"
    manifest.update(outputs=[str(atomic_write(out / "gronwall.txt", text))], verdict=res["verdict"])
    print(text, end="")
    return EXIT_OK if res["verdict"] == PASS else EXIT_FAIL


COMMANDS = {
    "run": cmd_run,
    "filter-test": cmd_filter_test,
    "sweep-alpha": cmd_sweep_alpha,
    "sweep-lambda": cmd_sweep_lambda,
    "sweep-joint": cmd_sweep_joint,
    "mms": cmd_mms,
    "energy-audit": cmd_energy_audit,
    "gronwall": cmd_gronwall,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lerayalpha", description="Leray-alpha channel solver with slip walls.",
                                epilog=config_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, epilog=config_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", help="config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        sp.add_argument("--out", help="output directory (overrides the output key)")
        if name == "filter-test":
            sp.add_argument("--fields", type=int, default=100)
        elif name == "sweep-alpha":
            sp.add_argument("--alphas", default="0.2,0.1,0.05,0.025")
        elif name == "sweep-lambda":
            sp.add_argument("--lambdas", default="0.9,0.99,0.999")
        elif name == "sweep-joint":
            sp.add_argument("--alpha1", type=float, default=0.2)
            sp.add_argument("--lambda1", type=float, default=0.9)
            sp.add_argument("--levels", type=int, default=4)
        elif name == "mms":
            sp.add_argument("--levels", type=int, default=3)
            sp.add_argument("--nu", type=float, default=0.05)
        elif name == "energy-audit":
            sp.add_argument("--dts", default="", help="comma-separated time steps")
        elif name == "gronwall":
            sp.add_argument("--delta", type=float, default=1e-3)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    manifest = {"command": args.command, "argv": list(argv if argv is not None else sys.argv[1:]),
                "version": __version__, "python": platform.python_version(), "numpy": np.__version__}
    out = Path(args.out or "out")
    code = EXIT_SOLVER
    try:
        cfg = _load(args)
        out = Path(cfg.output)
        manifest["config"] = cfg.as_dict()
        code = COMMANDS[args.command](cfg, args, out, manifest)
        manifest["status"] = "ok" if code == EXIT_OK else "verdict FAIL"
    except (ConfigError, ConfigurationError, DomainError, ParameterDomainError, FieldFormatError) as exc:
        code = EXIT_CONFIG
        manifest.update(status="configuration error", cause=str(exc))
        print(f"configuration error: {exc}", file=sys.stderr)
    except (CFLError, StateInvariantError, SolverConvergenceError, SweepRunError, FloatingPointError) as exc:
        code = EXIT_SOLVER
        manifest.update(status="solver failure", cause=str(exc))
        print(f"solver failure: {exc}", file=sys.stderr)
    finally:
        manifest["exit_code"] = code
        manifest["wall_time_s"] = time.perf_counter() - t0
        try:
            write_manifest(out / "manifest.json", manifest)
        except OSError as exc:
            print(f"cannot write manifest: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
