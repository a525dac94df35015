import math

import numpy as np
import pytest
import sympy as sp

from lerayalpha.boundary import SlipParams
from lerayalpha.filter import FilterParams, solve_filter
from lerayalpha.mesh import GridSpec, VelocityField, discrete_divergence, l2_norm
from lerayalpha.mms import ConfigurationError, ManufacturedSolution, check_slip_profile, slip_profile


@pytest.mark.parametrize("lam", [0.0, 0.3, 0.5, 0.9, 0.99])
def test_profile_obeys_closure(lam):
    g = slip_profile(lam)
    check_slip_profile(g, lam)
    assert g(1.0) == pytest.approx(0, abs=1e-14) and g(-1.0) == pytest.approx(0, abs=1e-14)


def test_profile_lambda_mismatch_rejected():
    with pytest.raises(ConfigurationError):
        check_slip_profile(slip_profile(0.3), 0.7)


def test_domain_errors():
    with pytest.raises(ValueError):
        ManufacturedSolution(lam=1.0)


@pytest.mark.parametrize("lam,alpha", [(0.5, 0.1), (0.0, 0.3), (0.9, 0.05)])
def test_filtered_profile_solves_ode_and_boundary_conditions(lam, alpha):
    sol = ManufacturedSolution(lam=lam, alpha=alpha)
    k, gb, g = sol.k, sol.gbar, sol.g
    y = np.linspace(-1, 1, 41)

    def l_op(fn):
        return lambda order: fn(y, order + 2) - k**2 * fn(y, order)

    gf = lambda yy, o: g.deriv(o)(yy) if o else g(yy)
    lg, lgb = l_op(gf), l_op(gb)
    # -(a^2/2) L^2 gbar + L gbar = L g
    l2gb = (gb(y, 4) - k**2 * gb(y, 2)) - k**2 * (gb(y, 2) - k**2 * gb(y, 0))
    res = -0.5 * alpha**2 * l2gb + lgb(0) - lg(0)
    assert np.abs(res).max() <= 1e-8 * max(1.0, np.abs(lg(0)).max())
    assert abs(gb(1.0, 0)) < 1e-10 and abs(gb(-1.0, 0)) < 1e-10
    assert abs(lam * gb(1.0, 1) + 0.5 * (1 - lam) * gb(1.0, 2)) < 1e-9
    assert abs(lam * gb(-1.0, 1) - 0.5 * (1 - lam) * gb(-1.0, 2)) < 1e-9


def test_forcing_matches_symbolic_oracle():
    sol = ManufacturedSolution(lam=0.5, nu=0.05, alpha=0.1)
    t, x, y = sp.symbols("t x y", real=True)
    gpoly = sum(sp.Float(c) * y**i for i, c in enumerate(sol.g.coef))
    psi = sp.cos(sp.Float(sol.omega) * t) * sp.sin(sp.Float(sol.k) * x) * gpoly
    u, v = sp.diff(psi, y), -sp.diff(psi, x)
    a = sp.cos(sp.Float(sol.omega) * t)
    p = a * (sp.Rational(1, 2) * sp.cos(sp.Float(sol.k) * x) * y + sp.Float(0.3) * sp.sin(sp.pi * y / 2))
    exprs = {
        "u_t": sp.diff(u, t), "v_t": sp.diff(v, t),
        "u_x": sp.diff(u, x), "u_y": sp.diff(u, y), "v_x": sp.diff(v, x), "v_y": sp.diff(v, y),
        "lap_u": sp.diff(u, x, 2) + sp.diff(u, y, 2), "lap_v": sp.diff(v, x, 2) + sp.diff(v, y, 2),
        "p_x": sp.diff(p, x), "p_y": sp.diff(p, y),
    }
    fns = {k: sp.lambdify((t, x, y), e, "numpy") for k, e in exprs.items()}
    rng = np.random.default_rng(0)
    for _ in range(20):
        tt, xx, yy = rng.uniform(0, 1), rng.uniform(0, 2), rng.uniform(-1, 1)
        e = {k: float(f(tt, xx, yy)) for k, f in fns.items()}
        ub, vb = sol.filtered_velocity(tt, xx, yy)
        # div(vb (x) v) = (vb . grad) v for solenoidal vb; 2 div D(v) = Laplacian v for solenoidal v
        fu = e["u_t"] + ub * e["u_x"] + vb * e["u_y"] - sol.nu * e["lap_u"] + e["p_x"]
        fv = e["v_t"] + ub * e["v_x"] + vb * e["v_y"] - sol.nu * e["lap_v"] + e["p_y"]
        gu, gv = sol.forcing_fields(tt, xx, yy)
        assert gu == pytest.approx(fu, abs=1e-10, rel=1e-10)
        assert gv == pytest.approx(fv, abs=1e-10, rel=1e-10)


def test_initial_field_is_solenoidal_and_close_to_samples():
    sol = ManufacturedSolution()
    errs = []
    for n in (16, 32, 64):
        g = GridSpec(n, n)
        d = sol.initial_field(g, 0.3)
        assert np.abs(discrete_divergence(d).values).max() < 1e-11
        errs.append(l2_norm(d - sol.sampled_velocity(g, 0.3).conform()))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_discrete_filter_converges_to_analytic_filter():
    sol = ManufacturedSolution(lam=0.5, alpha=0.2)
    errs = []
    for n in (16, 32, 64):
        g = GridSpec(n, n)
        fs = solve_filter(sol.initial_field(g), FilterParams(0.2), SlipParams(0.5, 1.0))
        exact = VelocityField.from_functions(g, lambda xx, yy: sol.filtered_velocity(0.0, xx, yy)[0],
                                             lambda xx, yy: sol.filtered_velocity(0.0, xx, yy)[1]).conform()
        errs.append(l2_norm(fs.v_bar - exact))
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(rates) > 1.8
