"""Helmholtz-Leray decomposition and pressure Neumann problems.

Channel solves are per-horizontal-wavevector two-point boundary value
problems handled by a Chebyshev tau method in coefficient space; the
kappa = 0 mode is a pure Neumann problem fixed by a zero-mean gauge
(its compatibility holds discretely because FFT differentiation has an
exact zero mean).  Ball solves reduce per spherical harmonic (l, m) to
radial collocation systems r^2 q'' + 2 r q' - l(l+1) q = r^2 f, which
are diagonal on monomials and therefore nonsingular once the surface
Neumann row replaces one collocation row (plus a mean gauge at l = 0).
"""

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import cheb, fields


def dirichlet_form(grid, bnd, zeta, u, w, jac=None, jac_w=None):
    """E(u, w) = int <grad u, grad w> + (1/zeta) int_G <u, w>
    - int_G pi(u, w).  Equals -lambda on a unit eigenmode pair."""
    ju = fields.jacobian(grid, u) if jac is None else jac
    jw = fields.jacobian(grid, w) if jac_w is None else jac_w
    val = grid.integrate(np.einsum("cd...,cd...->...", ju, jw))
    us, ws = bnd.trace(u), bnd.trace(w)
    if not zeta.is_infinite:
        val += zeta.inv * bnd.surface_integrate(fields.dot(us, ws))
    val -= bnd.surface_integrate(bnd.pi_form(us, ws))
    return float(val)


# ---------------------------------------------------------------------------
# channel tau solver


def _cheb_deriv_matrix(n):
    d = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        c = 2.0 * np.polynomial.chebyshev.chebder(e)  # d/dz on [0, 1]
        d[: len(c), j] = c
    return d


class ChannelPoisson:
    """Tau solves of p'' - kap2 p = f with Neumann data at both walls."""

    def __init__(self, grid):
        self.grid = grid
        n = grid.nz
        self.n = n
        self.coeff = cheb.coefficient_matrix(n)
        d1 = _cheb_deriv_matrix(n)
        self.d2 = d1 @ d1
        k = np.arange(n)
        self.bc_bot = 2.0 * (-1.0) ** (k + 1) * k ** 2  # value of T'(z=0)
        self.bc_top = 2.0 * k.astype(float) ** 2        # value of T'(z=1)
        # mean over z of each Chebyshev mode, for the kappa = 0 gauge
        mean = np.where(k % 2 == 0, 1.0 / (1.0 - k ** 2 + (k == 1)), 0.0)
        mean[1] = 0.0
        self.mean_row = mean
        self._lu = {}

    def _system(self, kap2):
        key = round(kap2, 12)
        if key not in self._lu:
            n = self.n
            m = np.zeros((n, n))
            if kap2 == 0.0:
                m[: n - 2] = self.d2[: n - 2]
                m[n - 2] = self.bc_top
                m[n - 1] = self.mean_row
            else:
                m[: n - 2] = self.d2[: n - 2] - kap2 * np.eye(n)[: n - 2]
                m[n - 2] = self.bc_bot
                m[n - 1] = self.bc_top
            self._lu[key] = lu_factor(m)
        return self._lu[key]

    def solve(self, rhs, g_bot, g_top):
        """rhs: volume scalar (nx, ny, nz); g_*: wall plane data with
        the outward-normal convention (g = dp/dnu)."""
        grid = self.grid
        nx, ny, n = grid.nx, grid.ny, grid.nz
        fh = np.fft.fft2(rhs, axes=(0, 1))
        gb = np.fft.fft2(np.asarray(g_bot), axes=(0, 1))
        gt = np.fft.fft2(np.asarray(g_top), axes=(0, 1))
        fc = np.einsum("ab,ijb->ija", self.coeff, fh)
        sol = np.empty_like(fc)
        k2g = grid.kx[:, None] ** 2 + grid.ky[None, :] ** 2
        for i in range(nx):
            for j in range(ny):
                kap2 = k2g[i, j]
                b = np.zeros(n, dtype=complex)
                b[: n - 2] = fc[i, j, : n - 2]
                if kap2 == 0.0:
                    b[n - 2] = gt[i, j]
                    b[n - 1] = 0.0
                else:
                    b[n - 2] = -gb[i, j]   # dp/dnu = -p'(0) at the bottom wall
                    b[n - 1] = gt[i, j]
                lu = self._system(kap2)
                sol[i, j] = lu_solve(lu, b)
        vals = np.polynomial.chebyshev.chebval(2.0 * grid.z - 1.0, np.moveaxis(sol, 2, 0))
        return np.real(np.fft.ifft2(vals, axes=(0, 1)))


# ---------------------------------------------------------------------------
# ball radial solver


class BallPoisson:
    """Per-harmonic radial solves with a surface Neumann row."""

    def __init__(self, grid):
        self.grid = grid
        nr = grid.nr
        r = grid.rr
        d1 = grid.dr_mat
        d2 = d1 @ d1
        self._base = (r[:, None] ** 2) * d2 + 2.0 * r[:, None] * d1
        self._bc = grid.surface_row @ d1
        self._mean = grid.rw * r ** 2
        self._lu = {}

    def _system(self, l):
        if l not in self._lu:
            m = self._base - l * (l + 1.0) * np.eye(self.grid.nr)
            m[-1] = self._bc
            if l == 0:
                m[0] = self._mean
            self._lu[l] = lu_factor(m)
        return self._lu[l]

    def solve(self, rhs, g_surf):
        """rhs: volume scalar; g_surf: Neumann data dq/dr at r = R."""
        grid = self.grid
        c = grid.sht(rhs)                       # (nr, L+1, L+1)
        gs = grid.sht(g_surf)                   # (L+1, L+1)
        sol = np.zeros_like(c)
        r2 = grid.rr ** 2
        for l in range(grid.lmax + 1):
            lu = self._system(l)
            for m in range(l + 1):
                b = r2 * c[:, l, m]
                b[-1] = gs[l, m]
                if l == 0:
                    b[0] = 0.0
                sol[:, l, m] = lu_solve(lu, b)
        return grid.isht(sol)


def make_poisson(grid):
    if grid.domain.name == "channel":
        return ChannelPoisson(grid)
    return BallPoisson(grid)


# ---------------------------------------------------------------------------
# public operations


def helmholtz_decompose(grid, bnd, u, solver=None):
    """u = P u + grad q with div(P u) = 0 and <P u, nu> = 0 on the wall.

    Returns (P u, q), q in the zero-mean gauge."""
    solver = solver or make_poisson(grid)
    rhs = fields.divergence(grid, u)
    un = bnd.normal_trace(bnd.trace(u))
    if grid.domain.name == "channel":
        q = solver.solve(rhs, g_bot=un[0], g_top=un[1])
    else:
        q = solver.solve(rhs, un)
    pu = u - grid.gradient(q)
    return pu, q


def leray_project(grid, bnd, u, solver=None):
    return helmholtz_decompose(grid, bnd, u, solver)[0]


def navier_pressure_data(bnd, zeta, u):
    """Neumann data of the pressure companion of a kinematic field
    satisfying the slip condition: (1/zeta) div_G u - 2 div_G pi(u)."""
    us = bnd.tangential(bnd.trace(u))
    g = -2.0 * bnd.surface_divergence(bnd.pi_apply(us))
    if not zeta.is_infinite:
        g = g + zeta.inv * bnd.surface_divergence(us)
    return g


def solve_pressure_neumann(grid, bnd, zeta, u, solver=None):
    """Harmonic pressure companion determined by boundary data alone."""
    solver = solver or make_poisson(grid)
    g = navier_pressure_data(bnd, zeta, u)
    zero = np.zeros((grid.nx, grid.ny, grid.nz) if grid.domain.name == "channel"
                    else (grid.nr, grid.ntheta, grid.nphi))
    if grid.domain.name == "channel":
        return solver.solve(zero, g_bot=g[0], g_top=g[1])
    return solver.solve(zero, g)


def stokes_apply(grid, bnd, zeta, u, solver=None, lap=None):
    """Stokes operator: Delta u - grad p with the companion pressure.

    Pass ``lap`` when Delta u is known in closed form (eigenfunction
    combinations); the default recomputes it spectrally.
    """
    p = solve_pressure_neumann(grid, bnd, zeta, u, solver=solver)
    if lap is None:
        lap = fields.vector_laplacian(grid, u)
    return lap - grid.gradient(p), p
