import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lerayalpha.boundary import NoSlipParams, SlipParams, ghost_fill
from lerayalpha.mesh import (
    GhostsNotFilledError,
    GridMismatchError,
    GridSpec,
    ScalarField,
    VelocityField,
    boundary_trace_l2,
    curl_of_stream,
    discrete_divergence,
    discrete_gradient,
    dissipation_norm,
    l2_inner,
    random_solenoidal,
    scalar_inner,
    sym_gradient,
    tensor_inner,
    wall_trace,
)

from oracles import divergence_loops, l2_loops, sym_gradient_loops


def rand_field(g, rng):
    return VelocityField(rng.standard_normal((g.nx, g.ny)), rng.standard_normal((g.nx, g.ny + 1)), g).conform()


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(3, 8)
    with pytest.raises(ValueError):
        GridSpec(8, 8, ly=3.0)
    g = GridSpec(8, 4, lx=4.0)
    assert g.hx == 0.5 and g.hy == 0.5


def test_field_shape_checks():
    g = GridSpec(8, 8)
    with pytest.raises(GridMismatchError):
        VelocityField(np.zeros((8, 9)), np.zeros((8, 9)), g)
    with pytest.raises(GridMismatchError):
        VelocityField.zeros(g) + VelocityField.zeros(GridSpec(16, 8))


def test_divergence_matches_loop_oracle():
    g = GridSpec(32, 32)
    f = VelocityField.from_functions(g, lambda x, y: np.sin(2 * np.pi * x / g.lx), lambda x, y: 0 * x)
    np.testing.assert_allclose(discrete_divergence(f).values, divergence_loops(f.u, f.v, g), atol=1e-13, rtol=0)
    r = rand_field(g, np.random.default_rng(0))
    np.testing.assert_allclose(discrete_divergence(r).values, divergence_loops(r.u, r.v, g), atol=1e-12, rtol=0)


def test_uniform_and_shear_strain():
    g = GridSpec(16, 8)
    one = ghost_fill(VelocityField.uniform(g, 1.0), SlipParams(0.0, 1.0))
    d = sym_gradient(one)
    assert np.all(d.d11 == 0) and np.all(d.d12 == 0) and np.all(d.d22 == 0)
    shear = VelocityField.from_functions(g, lambda x, y: y, lambda x, y: 0 * x)
    shear = shear.with_ghosts(np.full(g.nx, -1 - g.hy / 2), np.full(g.nx, 1 + g.hy / 2))
    d = sym_gradient(shear)
    np.testing.assert_allclose(d.d12, 0.5, atol=1e-13)
    assert np.abs(d.d11).max() == 0 and np.abs(d.d22).max() == 0


def test_sym_gradient_needs_ghosts():
    with pytest.raises(GhostsNotFilledError):
        sym_gradient(VelocityField.zeros(GridSpec(8, 8)))


def test_sym_gradient_matches_loop_oracle():
    g = GridSpec(12, 10)
    rng = np.random.default_rng(1)
    f = ghost_fill(rand_field(g, rng), SlipParams(0.3, 1.0))
    d = sym_gradient(f)
    d11, d12, d22 = sym_gradient_loops(f.u, f.v, *f.ghosts, g)
    for a, b in ((d.d11, d11), (d.d12, d12), (d.d22, d22)):
        np.testing.assert_allclose(a, b, atol=1e-13 * np.abs(b).max(), rtol=0)


def test_l2_inner_examples():
    g = GridSpec(16, 16)
    z = VelocityField.zeros(g)
    assert l2_inner(z, z) == 0.0
    one = VelocityField.uniform(g, 1.0)
    assert l2_inner(one, one) == pytest.approx(4.0, abs=1e-13)
    rng = np.random.default_rng(2)
    a, b = rand_field(g, rng), rand_field(g, rng)
    ref = l2_loops(a, b, g)
    assert l2_inner(a, b) == pytest.approx(ref, rel=1e-14)


def test_boundary_trace_examples():
    g = GridSpec(16, 8)
    assert boundary_trace_l2(ghost_fill(VelocityField.zeros(g), SlipParams(0.5, 1.0))) == 0.0
    one = ghost_fill(VelocityField.uniform(g, 1.0), SlipParams(0.0, 1.0))
    assert boundary_trace_l2(one) == pytest.approx(4.0, abs=1e-13)


def test_boundary_trace_matches_quadrature_oracle():
    g = GridSpec(16, 8)
    f = ghost_fill(rand_field(g, np.random.default_rng(3)), SlipParams(0.4, 1.0))
    lo, hi = f.ghosts
    ref = 0.0
    for i in range(g.nx):
        ref += g.hx * ((0.5 * (lo[i] + f.u[i, 0])) ** 2 + (0.5 * (hi[i] + f.u[i, -1])) ** 2)
    assert boundary_trace_l2(f) == pytest.approx(ref, rel=1e-13)


def test_wall_trace_is_second_order_for_smooth_profile():
    errs = []
    for n in (16, 32, 64):
        g = GridSpec(8, n)
        sp = SlipParams(0.5, 1.0)
        f = ghost_fill(VelocityField.from_functions(g, lambda x, y: 2.0 - y**2, lambda x, y: 0 * x), sp)
        lo, _ = wall_trace(f)
        errs.append(abs(lo[0] - 1.0))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_dissipation_examples():
    g = GridSpec(16, 16)
    sp = SlipParams(0.0, 0.3)
    assert dissipation_norm(ghost_fill(VelocityField.zeros(g), sp), sp) == 0.0
    shear = VelocityField.from_functions(g, lambda x, y: y, lambda x, y: 0 * x)
    shear = shear.with_ghosts(np.full(g.nx, -1 - g.hy / 2), np.full(g.nx, 1 + g.hy / 2))
    assert dissipation_norm(shear, sp) == pytest.approx(4.0 * sp.nu, rel=1e-12)


def test_dissipation_composition():
    g = GridSpec(16, 16)
    sp = SlipParams(0.5, 0.2)
    f = ghost_fill(rand_field(g, np.random.default_rng(4)), sp)
    d11, d12, d22 = sym_gradient_loops(f.u, f.v, *f.ghosts, g)
    w = g.node_weights()[None, :]
    dd = g.cell_area * (np.sum(d11**2) + np.sum(d22**2) + 2 * np.sum(w * d12**2))
    lo, hi = f.ghosts
    tr = g.hx * (np.sum((0.5 * (lo + f.u[:, 0])) ** 2) + np.sum((0.5 * (hi + f.u[:, -1])) ** 2))
    ref = 2 * sp.nu * dd + 2 * sp.nu * sp.boundary_weight * tr
    assert dissipation_norm(f, sp) == pytest.approx(ref, rel=1e-12)


def test_gradient_divergence_adjoint():
    g = GridSpec(16, 12)
    rng = np.random.default_rng(5)
    for _ in range(5):
        q = ScalarField(rng.standard_normal((g.nx, g.ny)), g)
        w = rand_field(g, rng)
        lhs = l2_inner(discrete_gradient(q), w)
        rhs = -scalar_inner(q, discrete_divergence(w))
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 20), st.integers(4, 20), st.integers(0, 2**31 - 1))
def test_curl_of_stream_is_solenoidal(nx, ny, seed):
    g = GridSpec(nx, ny)
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal((nx, ny + 1))
    f = curl_of_stream(psi, g)
    assert np.abs(discrete_divergence(f).values).max() <= 1e-12 * max(np.abs(psi).max(), 1) / min(g.hx, g.hy)
    r = random_solenoidal(g, rng, smooth=seed % 3)
    assert r.is_boundary_conformed()
    assert np.abs(discrete_divergence(r).values).max() <= 1e-12 / min(g.hx, g.hy)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_sym_gradient_linear(a, b, seed):
    g = GridSpec(8, 8)
    rng = np.random.default_rng(seed)
    sp = SlipParams(0.5, 1.0)
    f1, f2 = rand_field(g, rng), rand_field(g, rng)
    lhs = sym_gradient(ghost_fill(a * f1 + b * f2, sp))
    d1, d2 = sym_gradient(ghost_fill(f1, sp)), sym_gradient(ghost_fill(f2, sp))
    for x, y1, y2 in ((lhs.d11, d1.d11, d2.d11), (lhs.d12, d1.d12, d2.d12), (lhs.d22, d1.d22, d2.d22)):
        np.testing.assert_allclose(x, a * y1 + b * y2, atol=1e-12 * (abs(a) + abs(b) + 1) * 20)


def test_tensor_inner_symmetric():
    g = GridSpec(8, 8)
    rng = np.random.default_rng(6)
    sp = NoSlipParams(1.0)
    a = sym_gradient(ghost_fill(rand_field(g, rng), sp))
    b = sym_gradient(ghost_fill(rand_field(g, rng), sp))
    assert tensor_inner(a, b, g) == pytest.approx(tensor_inner(b, a, g), rel=1e-14)


def test_pack_roundtrip_and_scalar_mean():
    g = GridSpec(8, 6)
    f = rand_field(g, np.random.default_rng(7))
    back = VelocityField.unpack(g, f.pack())
    assert np.array_equal(back.u, f.u) and np.array_equal(back.v, f.v)
    q = ScalarField(np.arange(48.0).reshape(8, 6), g).remove_mean()
    assert abs(q.integral()) < 1e-12
    with pytest.raises(ValueError):
        ScalarField(np.ones((8, 6)), g, mean_zero=True)
