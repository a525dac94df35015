"""Linear solves for x-periodic operators on the channel.

Every operator in this package is translation invariant in x with a stencil
reaching one column either side, so it can be written as

    (L X)[i] = sum_s  Y_s @ X[i + s],      s in {-1, 0, 1},

where ``X[i]`` is the vector of unknowns stored in column ``i``. A discrete
Fourier transform in x turns ``L`` into independent blocks
``sum_s Y_s exp(i s theta_m)``, one per wavenumber, each a banded matrix in y.

The blocks ``Y_s`` are read off by applying the operator to unit vectors on a
four-column copy of the grid (the stencil does not depend on ``nx``).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SHIFTS = (-1, 0, 1)


class SolverConvergenceError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def probe_stencil(apply, n_in: int, n_out: int | None = None, nx_probe: int = 4):
    """Return ``{s: Y_s}`` for a column operator ``apply((nx, n_in)) -> (nx, n_out)``."""
    blocks = None
    for k in range(n_in):
        x = np.zeros((nx_probe, n_in))
        x[0, k] = 1.0
        y = np.asarray(apply(x))
        if blocks is None:
            n_out = y.shape[1]
            blocks = {s: np.zeros((n_out, n_in)) for s in SHIFTS}
        touched = {(-s) % nx_probe for s in SHIFTS}
        for s in SHIFTS:
            blocks[s][:, k] = y[(-s) % nx_probe]
        for col in set(range(nx_probe)) - touched:
            if np.any(y[col] != 0.0):
                raise ValueError("operator stencil reaches beyond one column")
    return {s: sp.csr_matrix(b) for s, b in blocks.items()}


def mode_matrix(stencil, theta: float):
    out = None
    for s, y in stencil.items():
        term = y * np.exp(1j * s * theta)
        out = term if out is None else out + term
    return sp.csc_matrix(out)


def assemble_sparse(stencil, nx: int):
    """Full sparse matrix acting on ``X.ravel()`` for ``X`` of shape ``(nx, n)``."""
    mat = None
    for s, y in stencil.items():
        shift = sp.csr_matrix((np.ones(nx), (np.arange(nx), (np.arange(nx) + s) % nx)), shape=(nx, nx))
        term = sp.kron(shift, y, format="csr")
        mat = term if mat is None else mat + term
    return mat.tocsr()


class ModalSolver:
    """Factorise every Fourier block once and solve many right-hand sides.

    ``pin`` names an unknown index whose mode-0 equation is replaced by
    ``x[pin] = 0``; it removes a one-dimensional null space (constant
    pressure). Callers restore their own normalisation afterwards.
    """

    def __init__(self, stencil, nx: int, pin: int | None = None):
        self.nx = nx
        self.pin = pin
        self.n = next(iter(stencil.values())).shape[0]
        self._lu = []
        for m in range(nx // 2 + 1):
            a = mode_matrix(stencil, 2.0 * np.pi * m / nx)
            if m == 0 and pin is not None:
                a = a.tolil()
                a[pin, :] = 0.0
                a[pin, pin] = 1.0
                a = a.tocsc()
            self._lu.append(spla.splu(a))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        fh = np.fft.rfft(rhs, axis=0)
        if self.pin is not None:
            fh[0, self.pin] = 0.0
        out = np.empty_like(fh)
        for m, lu in enumerate(self._lu):
            out[m] = lu.solve(fh[m])
        return np.fft.irfft(out, n=self.nx, axis=0)


def uzawa_cg(a_solve, div, grad, rhs_u, precond, tol=1e-12, maxiter=500):
    """Preconditioned CG on the pressure Schur complement.

    Solves ``A u + G p = f, D u = 0`` with ``G = -D^T``; the Schur operator
    ``p -> -D A^{-1} G p`` is symmetric positive definite on mean-zero
    pressures. ``precond`` approximates its inverse. Returns ``(u, p, iters)``.
    """

    def schur(p):
        return -div(a_solve(grad(p)))

    def proj(p):
        return p - p.mean()

    u0 = a_solve(rhs_u)
    b = -proj(div(u0))
    p = np.zeros_like(b)
    r = b.copy()
    z = proj(precond(r))
    d = z.copy()
    rz = np.vdot(r, z).real
    bnorm = np.linalg.norm(b)
    it = 0
    if bnorm == 0.0:
        return u0, p, 0
    while np.linalg.norm(r) > tol * bnorm:
        if it >= maxiter:
            raise SolverConvergenceError(
                f"Uzawa CG did not converge in {maxiter} iterations",
                residual=np.linalg.norm(r) / bnorm,
            )
        sd = proj(schur(d))
        step = rz / np.vdot(d, sd).real
        p = p + step * d
        r = r - step * sd
        z = proj(precond(r))
        rz_new = np.vdot(r, z).real
        d = z + (rz_new / rz) * d
        rz = rz_new
        it += 1
    u = a_solve(rhs_u - grad(p))
    return u, p, it
