"""Boundary geometry: frames, curvature, Hodge star and the slip
condition residual.

Each boundary object fixes a right-handed orthonormal moving frame
(e1, e2, nu) with nu the outward normal, exposes the second
fundamental form pi (sign convention: pi = (1/R) I on the sphere of
radius R, so pi(u, u) >= 0 for the ball), and provides tangential
calculus on boundary-sampled fields.

Boundary fields mirror the ambient-component convention of the volume
fields: channel boundary scalars have shape (2, nx, ny) with wall 0 at
z = 0 and wall 1 at z = 1; sphere boundary scalars have shape
(ntheta, nphi).  Vectors carry a leading ambient component axis.
"""

import numpy as np

from . import fields
from .domain import Ball, Channel


def make_boundary(grid):
    if grid.domain.name == "channel":
        return ChannelBoundary(grid)
    return SphereBoundary(grid)


class ChannelBoundary:
    """The two flat walls z = 0 and z = 1 (flat: pi = 0)."""

    def __init__(self, grid):
        self.grid = grid
        # outward normals: -e_z below, +e_z on top
        self.nu = np.zeros((3, 2, 1, 1))
        self.nu[2, 0] = -1.0
        self.nu[2, 1] = 1.0
        # right-handed frames (e1, e2, nu)
        self.e1 = np.zeros((3, 2, 1, 1))
        self.e2 = np.zeros((3, 2, 1, 1))
        self.e1[1, 0] = 1.0   # bottom: e1 = y
        self.e2[0, 0] = 1.0   # bottom: e2 = x
        self.e1[0, 1] = 1.0   # top: e1 = x
        self.e2[1, 1] = 1.0   # top: e2 = y
        self.mean_curvature = 0.0

    def trace(self, f):
        return np.stack([f[..., 0], f[..., -1]], axis=f.ndim - 3)

    def normal_derivative(self, f):
        return self.trace(self.grid.dz(f)) * self.nu[2]

    def normal_trace(self, us):
        return fields.dot(us, self.nu)

    def tangential(self, us):
        return us - self.normal_trace(us) * self.nu

    def star(self, vs):
        return fields.cross(self.nu, vs)

    def pi_apply(self, vs):
        return np.zeros_like(vs)

    def pi_form(self, us, vs):
        return np.zeros(np.broadcast_shapes(us.shape, vs.shape)[1:])

    def _plane_dx(self, fs):
        fh = np.fft.fft(fs, axis=-2)
        return np.real(np.fft.ifft(1j * self.grid.kx[:, None] * fh, axis=-2))

    def _plane_dy(self, fs):
        fh = np.fft.fft(fs, axis=-1)
        return np.real(np.fft.ifft(1j * self.grid.ky[None, :] * fh, axis=-1))

    def surface_gradient(self, fs):
        return np.stack([self._plane_dx(fs), self._plane_dy(fs), np.zeros_like(fs)])

    def surface_divergence(self, vs):
        return self._plane_dx(vs[0]) + self._plane_dy(vs[1])

    def surface_integrate(self, fs):
        return float(fs.reshape(-1, self.grid.nx, self.grid.ny).sum(axis=0).sum()
                     * self.grid.hx * self.grid.hy)


class SphereBoundary:
    """The sphere r = R with outward normal; pi = (1/R) I on tangents."""

    def __init__(self, grid):
        self.grid = grid
        self.radius = grid.domain.radius
        self.nu = grid.rhat
        self.e1 = grid.that
        self.e2 = grid.phat
        self.mean_curvature = 2.0 / self.radius

    def trace(self, f):
        return self.grid.trace(f)

    def normal_derivative(self, f):
        return self.grid.trace_dr(f)

    def normal_trace(self, us):
        return fields.dot(us, self.nu)

    def tangential(self, us):
        return us - self.normal_trace(us) * self.nu

    def star(self, vs):
        return fields.cross(self.nu, vs)

    def pi_apply(self, vs):
        return self.tangential(vs) / self.radius

    def pi_form(self, us, vs):
        return fields.dot(self.tangential(us), self.tangential(vs)) / self.radius

    def surface_gradient(self, fs):
        c = self.grid.sht(fs)
        gt = self.grid.isht_dtheta(c) / self.radius
        gp = self.grid.isht_dphi(c) / self.radius
        return gt[None] * self.e1 + gp[None] * self.e2

    def surface_divergence(self, vs):
        # trace of the tangential Jacobian of the ambient components;
        # frame components are not smooth at the poles, so only the
        # ambient scalars ever go through a harmonic transform
        return sum(self.surface_gradient(vs[c])[c] for c in range(3))

    def surface_integrate(self, fs):
        return self.grid.surface_integrate(fs)


def to_frame(bnd, vs):
    """Frame components (xi1, xi2) of a tangent boundary field."""
    return fields.dot(vs, bnd.e1), fields.dot(vs, bnd.e2)


def from_frame(bnd, xi1, xi2):
    return xi1 * bnd.e1 + xi2 * bnd.e2


def hodge_star_components(xi1, xi2):
    """Rotation by +90 degrees about the outward normal: (x1,x2) -> (-x2,x1)."""
    return -xi2, xi1


def navier_residual(bnd, u, zeta, omega=None):
    """Tangential residual of the slip condition for a volume field u.

    Zero exactly when (curl u)^par = -(1/zeta) *(u^par)
    - 2 *(grad_G <u,nu>) + 2 *(pi(u^par)) holds on the boundary; the
    normal-gradient term drops for kinematic (tangent) fields.
    """
    grid = bnd.grid
    if omega is None:
        omega = fields.curl(grid, u)
    om_par = bnd.tangential(bnd.trace(omega))
    us = bnd.trace(u)
    u_par = bnd.tangential(us)
    un = bnd.normal_trace(us)
    res = om_par + zeta.inv * bnd.star(u_par)
    res = res + 2.0 * bnd.star(bnd.surface_gradient(un))
    res = res - 2.0 * bnd.star(bnd.pi_apply(u_par))
    return res


def navier_residual_components(bnd, u, zeta, omega=None):
    """Same residual assembled in frame components, term by term.

    Independent code path used to cross-check `navier_residual`: works
    with the scalar frame components and directional derivatives along
    e1, e2 instead of ambient cross products.
    """
    grid = bnd.grid
    if omega is None:
        omega = fields.curl(grid, u)
    om1, om2 = to_frame(bnd, bnd.trace(omega))
    us = bnd.trace(u)
    u1, u2 = to_frame(bnd, us)
    un = bnd.normal_trace(us)
    gn = bnd.surface_gradient(un)
    g1, g2 = fields.dot(gn, bnd.e1), fields.dot(gn, bnd.e2)
    if isinstance(bnd, SphereBoundary):
        p11 = p22 = 1.0 / bnd.radius
    else:
        p11 = p22 = 0.0
    r1 = om1 - zeta.inv * u2 - 2.0 * g2 + 2.0 * p22 * u2
    r2 = om2 + zeta.inv * u1 + 2.0 * g1 - 2.0 * p11 * u1
    return from_frame(bnd, r1, r2)
