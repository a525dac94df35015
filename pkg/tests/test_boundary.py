import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lerayalpha.boundary import (
    NoSlipParams,
    ParameterDomainError,
    SlipParams,
    dirichlet_clamp,
    ghost_fill,
    robin_residual,
    slip_length,
)
from lerayalpha.mesh import GridSpec, VelocityField, boundary_trace_l2, wall_trace


def profile(g, fn):
    return VelocityField.from_functions(g, lambda x, y: fn(y), lambda x, y: 0 * x)


def test_parameter_domain():
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(ParameterDomainError):
            SlipParams(bad, 1.0)
    with pytest.raises(ParameterDomainError):
        SlipParams(0.5, 0.0)
    with pytest.raises(ParameterDomainError):
        NoSlipParams(-1.0)


def test_slip_length():
    assert slip_length(0.0) == math.inf
    assert slip_length(0.5) == pytest.approx(0.5)
    lams = [0.1, 0.3, 0.5, 0.9, 0.99]
    lens = [slip_length(x) for x in lams]
    assert all(a > b for a, b in zip(lens, lens[1:]))


def test_mirror_ghost_for_perfect_slip():
    g = GridSpec(8, 8)
    f = ghost_fill(VelocityField.uniform(g, 2.5), SlipParams(0.0, 1.0))
    assert np.all(f.ghosts[0] == 2.5) and np.all(f.ghosts[1] == 2.5)
    assert robin_residual(f, SlipParams(0.0, 1.0)) == 0.0


def test_zero_field_residual():
    g = GridSpec(8, 8)
    assert robin_residual(ghost_fill(VelocityField.zeros(g), SlipParams(0.7, 1.0)), SlipParams(0.7, 1.0)) == 0.0


def test_shear_profile_with_exact_ghosts_is_not_robin():
    # u = y sampled with analytic ghosts: residual = lam * 1 + (1 - lam) / 2
    g = GridSpec(8, 16)
    for lam in (0.0, 0.3, 0.8):
        f = profile(g, lambda y: y).with_ghosts(np.full(g.nx, -1 - g.hy / 2), np.full(g.nx, 1 + g.hy / 2))
        assert robin_residual(f, SlipParams(lam, 1.0)) == pytest.approx(lam + 0.5 * (1 - lam), rel=1e-12)
        filled = ghost_fill(f, SlipParams(lam, 1.0))
        assert robin_residual(filled, SlipParams(lam, 1.0)) <= 1e-12
        assert np.array_equal(filled.u, f.u) and np.array_equal(filled.v, f.v)


def test_robin_profile_after_fill():
    # u = 2 - y^2 satisfies the closure for lambda = 1/2
    g = GridSpec(8, 32)
    sp = SlipParams(0.5, 1.0)
    f = ghost_fill(profile(g, lambda y: 2.0 - y**2), sp)
    assert robin_residual(f, sp) <= 1e-12


def test_poiseuille_residual_with_analytic_ghosts():
    # u = 1 - y^2 with ghosts sampled from the profile: the discrete residual is
    # (1 - lam) + lam * hy^2 / 4 (trace picks up hy^2/4 from averaging)
    g = GridSpec(8, 32)
    yg = 1 + g.hy / 2
    for lam in (0.0, 0.25, 0.6):
        f = profile(g, lambda y: 1 - y**2).with_ghosts(np.full(g.nx, 1 - yg**2), np.full(g.nx, 1 - yg**2))
        expect = (1 - lam) + lam * g.hy**2 / 4
        assert robin_residual(f, SlipParams(lam, 1.0)) == pytest.approx(expect, abs=1e-12)


def test_dirichlet_clamp():
    g = GridSpec(8, 16)
    z = dirichlet_clamp(VelocityField.zeros(g))
    assert boundary_trace_l2(z) == 0.0
    f = dirichlet_clamp(profile(g, lambda y: 1 - y**2))
    lo, hi = wall_trace(f)
    assert np.abs(lo).max() == 0.0 and np.abs(hi).max() == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 0.999))
def test_fill_never_touches_interior(seed, lam):
    g = GridSpec(8, 8)
    rng = np.random.default_rng(seed)
    f = VelocityField(rng.standard_normal((8, 8)), rng.standard_normal((8, 9)), g).conform()
    out = ghost_fill(f, SlipParams(lam, 1.0))
    assert np.array_equal(out.u, f.u) and np.array_equal(out.v, f.v)
    assert robin_residual(out, SlipParams(lam, 1.0)) <= 1e-10 * (1 + np.abs(f.u).max() / g.hy)


def test_ghost_ordering_in_lambda():
    g = GridSpec(8, 16)
    shear = profile(g, lambda y: 1.0 + 0 * y)
    ghosts = [ghost_fill(shear, SlipParams(lam, 1.0)).ghosts[0][0] for lam in (0.1, 0.5, 0.9)]
    # larger slip length keeps the ghost closer to the interior value
    assert ghosts[0] > ghosts[1] > ghosts[2]


def test_convergence_to_clamp():
    g = GridSpec(8, 16)
    f = profile(g, lambda y: np.cos(y))
    clamp = dirichlet_clamp(f).ghosts[0]
    diffs = []
    for lam in (0.9, 0.99, 0.999):
        d = np.abs(ghost_fill(f, SlipParams(lam, 1.0)).ghosts[0] - clamp).max()
        diffs.append(d / (1 - lam))
    # max-norm difference is bounded by a fixed multiple of (1 - lam)
    assert max(diffs) <= 2.0 / g.hy * np.abs(f.u).max()
