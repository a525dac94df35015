"""Manufactured solution for the channel with slip walls.

Velocity from a stream function ``psi = a(t) sin(k x) g(y)`` with
``a(t) = cos(omega t)`` and ``g`` a quintic vanishing on the walls and
satisfying the slip closure there for the configured lambda. The filtered
velocity is known in closed form: its stream function ``a sin(kx) gbar(y)``
solves the fourth-order ODE obtained by taking the curl of the filter
equation,

    -(alpha^2/2) (D^2 - k^2)^2 gbar + (D^2 - k^2) gbar = (D^2 - k^2) g,

with ``gbar(+-1) = 0`` and the slip closure on ``gbar'``. Its solution is a
polynomial particular part plus ``cosh/sinh(k y)`` and two exponentials of
rate ``mu = sqrt(k^2 + 2/alpha^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial as P

from .boundary import SlipParams
from .mesh import GridSpec, ScalarField, VelocityField, curl_of_stream
from .stepper import Forcing


class ConfigurationError(ValueError):
    pass


def slip_profile(lam: float, cubic: float = 0.25) -> P:
    """``(1 - y^2)(1 + c1 y + c2 y^2 + cubic y^3)`` obeying the slip closure at both walls."""
    base = P([1.0, 0.0, -1.0])

    def robin(poly):
        d1, d2 = poly.deriv(1), poly.deriv(2)
        return np.array([lam * d1(1.0) + 0.5 * (1 - lam) * d2(1.0),
                         lam * d1(-1.0) - 0.5 * (1 - lam) * d2(-1.0)])

    g0 = base * P([1.0, 0.0, 0.0, cubic])
    cols = [robin(base * P([0.0, 1.0])), robin(base * P([0.0, 0.0, 1.0]))]
    c1, c2 = np.linalg.solve(np.column_stack(cols), -robin(g0))
    return base * P([1.0, c1, c2, cubic])


def check_slip_profile(g: P, lam: float, tol: float = 1e-10) -> None:
    """Raise unless ``g`` vanishes at both walls and obeys the slip closure for ``lam``."""
    err = max(abs(g(1.0)), abs(g(-1.0)),
              abs(lam * g.deriv(1)(1.0) + 0.5 * (1 - lam) * g.deriv(2)(1.0)),
              abs(lam * g.deriv(1)(-1.0) - 0.5 * (1 - lam) * g.deriv(2)(-1.0)))
    if err > tol * max(1.0, np.abs(g.coef).max()):
        raise ConfigurationError(f"profile does not satisfy the slip closure for lambda={lam} (defect {err:.2e})")


class _ProfileFunction:
    """``poly(y) + sum_i c_i basis_i(y)`` with derivatives up to order 3."""

    def __init__(self, poly: P, k: float, mu: float, coef):
        self.poly, self.k, self.mu, self.coef = poly, k, mu, np.asarray(coef)

    def _basis(self, y, order):
        k, mu = self.k, self.mu
        ch = np.cosh(k * y) if order % 2 == 0 else np.sinh(k * y)
        sh = np.sinh(k * y) if order % 2 == 0 else np.cosh(k * y)
        e1 = np.exp(mu * (y - 1.0))
        e2 = np.exp(-mu * (y + 1.0))
        return [k**order * ch, k**order * sh, mu**order * e1, (-mu) ** order * e2]

    def __call__(self, y, order=0):
        y = np.asarray(y, dtype=float)
        out = self.poly.deriv(order)(y) if order else self.poly(y)
        for c, b in zip(self.coef, self._basis(y, order)):
            out = out + c * b
        return out


def filtered_profile(g: P, k: float, alpha: float, lam: float) -> _ProfileFunction:
    s = 1.0 + 0.5 * alpha**2 * k**2
    c = 0.5 * alpha**2 / s
    part = P([0.0])
    for n in range(g.degree() // 2 + 1):
        part = part + c**n * g.deriv(2 * n) if n else part + g
    part = part * (1.0 / s)
    mu = math.sqrt(k**2 + 2.0 / alpha**2)
    probe = _ProfileFunction(P([0.0]), k, mu, np.zeros(4))

    def conds(fn_val, d1, d2):
        return [fn_val(1.0), fn_val(-1.0),
                lam * d1(1.0) + 0.5 * (1 - lam) * d2(1.0),
                lam * d1(-1.0) - 0.5 * (1 - lam) * d2(-1.0)]

    mat = np.zeros((4, 4))
    for i in range(4):
        b = lambda y, o, i=i: probe._basis(np.asarray(y, float), o)[i]
        mat[:, i] = conds(lambda y: b(y, 0), lambda y: b(y, 1), lambda y: b(y, 2))
    rhs = -np.array(conds(part, part.deriv(1), part.deriv(2)))
    return _ProfileFunction(part, k, mu, np.linalg.solve(mat, rhs))


@dataclass
class ManufacturedSolution:
    lam: float = 0.5
    nu: float = 0.05
    alpha: float | None = 0.1
    lx: float = 2.0
    omega: float = 2.0 * math.pi
    amplitude: float = 1.0

    def __post_init__(self):
        SlipParams(self.lam, self.nu)
        self.k = 2.0 * math.pi / self.lx
        self.g = self.amplitude * slip_profile(self.lam)
        if self.alpha:
            self.gbar = filtered_profile(self.g, self.k, self.alpha, self.lam)
        else:
            self.gbar = _ProfileFunction(self.g, self.k, 1.0, np.zeros(4))
        self._check_profile()

    def _check_profile(self):
        check_slip_profile(self.g, self.lam)

    # time modulation
    def a(self, t):
        return math.cos(self.omega * t)

    def da(self, t):
        return -self.omega * math.sin(self.omega * t)

    # fields
    def stream(self, t, x, y):
        return self.a(t) * np.sin(self.k * x) * self.g(y)

    def velocity(self, t, x, y):
        k, g = self.k, self.g
        a = self.a(t)
        return a * np.sin(k * x) * g.deriv(1)(y), -a * k * np.cos(k * x) * g(y)

    def filtered_velocity(self, t, x, y):
        k, gb = self.k, self.gbar
        a = self.a(t)
        return a * np.sin(k * x) * gb(y, 1), -a * k * np.cos(k * x) * gb(y, 0)

    def pressure(self, t, x, y):
        return self.a(t) * (0.5 * np.cos(self.k * x) * y + 0.3 * np.sin(0.5 * math.pi * y))

    def pressure_gradient(self, t, x, y):
        a, k = self.a(t), self.k
        return (-0.5 * a * k * np.sin(k * x) * y,
                a * (0.5 * np.cos(k * x) + 0.15 * math.pi * np.cos(0.5 * math.pi * y)))

    def forcing_fields(self, t, x, y):
        k, nu = self.k, self.nu
        a, da = self.a(t), self.da(t)
        g = self.g
        g0, g1, g2, g3 = g(y), g.deriv(1)(y), g.deriv(2)(y), g.deriv(3)(y)
        b0, b1 = self.gbar(y, 0), self.gbar(y, 1)
        s, c = np.sin(k * x), np.cos(k * x)
        px, py = self.pressure_gradient(t, x, y)
        fu = (da * s * g1 + a * a * k * s * c * (b1 * g1 - b0 * g2)
              - nu * a * s * (g3 - k * k * g1) + px)
        fv = (-da * k * c * g0 + a * a * k * k * (s * s * b1 * g0 + c * c * b0 * g1)
              + nu * a * k * c * (g2 - k * k * g0) + py)
        return fu, fv

    def forcing(self) -> Forcing:
        return Forcing.from_functions(lambda t, x, y: self.forcing_fields(t, x, y)[0],
                                      lambda t, x, y: self.forcing_fields(t, x, y)[1])

    # discrete samples
    def initial_field(self, grid: GridSpec, t: float = 0.0) -> VelocityField:
        """Discrete curl of the nodal stream function: solenoidal to round-off."""
        xn, yn = grid.node_coords()
        return curl_of_stream(self.stream(t, xn, yn), grid).conform()

    def sampled_velocity(self, grid: GridSpec, t: float) -> VelocityField:
        return VelocityField.from_functions(grid, lambda x, y: self.velocity(t, x, y)[0],
                                            lambda x, y: self.velocity(t, x, y)[1])

    def sampled_pressure(self, grid: GridSpec, t: float) -> ScalarField:
        xc, yc = grid.center_coords()
        return ScalarField(self.pressure(t, xc, yc), grid)
