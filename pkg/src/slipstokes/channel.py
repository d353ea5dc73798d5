"""Spectral calculus on the periodic channel.

Fields are sampled on a tensor grid: uniform in the periodic x and y
directions, Chebyshev-Gauss-Lobatto in z on [0, 1].  Horizontal
derivatives are exact for band-limited data (FFT), vertical ones use
the collocation differentiation matrix.  Scalars are arrays of shape
(nx, ny, nz); vectors carry a leading component axis.
"""

import numpy as np

from . import cheb


class ChannelGrid:
    def __init__(self, domain, nx, ny, nz):
        self.domain = domain
        self.nx, self.ny, self.nz = nx, ny, nz
        self.x = domain.lx * np.arange(nx) / nx
        self.y = domain.ly * np.arange(ny) / ny
        self.z = cheb.gauss_lobatto(nz, 0.0, 1.0)
        self.zw = cheb.clenshaw_curtis_weights(self.z, 0.0, 1.0)
        self.kx = 2.0 * np.pi * np.fft.fftfreq(nx, d=domain.lx / nx)
        self.ky = 2.0 * np.pi * np.fft.fftfreq(ny, d=domain.ly / ny)
        self.hx = domain.lx / nx
        self.hy = domain.ly / ny
        self._coeff_mat = cheb.coefficient_matrix(nz)
        # synthesis (Chebyshev-Vandermonde) for coefficient-space
        # z-derivatives; composing nodal differentiation matrices loses
        # ~nz^4 eps which is far too coarse for residual diagnostics
        theta = np.arccos(np.clip(2.0 * self.z - 1.0, -1.0, 1.0))
        self._synth_mat = np.cos(theta[:, None] * np.arange(nz)[None, :])

    # -- scalar derivatives ------------------------------------------------

    def dx(self, f):
        fh = np.fft.fft(f, axis=0)
        return np.real(np.fft.ifft(1j * self.kx[:, None, None] * fh, axis=0))

    def dy(self, f):
        fh = np.fft.fft(f, axis=1)
        return np.real(np.fft.ifft(1j * self.ky[None, :, None] * fh, axis=1))

    def _dz_order(self, f, order):
        c = cheb.round_tail(np.einsum("ab,...b->...a", self._coeff_mat, f))
        cd = np.polynomial.chebyshev.chebder(c, order, scl=2.0, axis=-1)
        return np.einsum("ab,...b->...a", self._synth_mat[:, :cd.shape[-1]], cd)

    def dz(self, f):
        return self._dz_order(f, 1)

    def gradient(self, f):
        return np.stack([self.dx(f), self.dy(f), self.dz(f)])

    def laplacian(self, f):
        fh = np.fft.fft2(f, axes=(0, 1))
        k2 = self.kx[:, None, None] ** 2 + self.ky[None, :, None] ** 2
        horiz = np.real(np.fft.ifft2(-k2 * fh, axes=(0, 1)))
        return horiz + self._dz_order(f, 2)

    # -- quadrature ---------------------------------------------------------

    def integrate(self, f):
        """Volume integral; leading axes (if any) are summed too."""
        return float(np.einsum("ab,b->", f.reshape(-1, self.nz), self.zw)) * self.hx * self.hy

    @property
    def quad_weights(self):
        """Pointwise quadrature weights: integrate(f) == sum(f * w)."""
        return np.broadcast_to(self.zw * (self.hx * self.hy),
                               (self.nx, self.ny, self.nz))

    def norm2(self, f):
        """Squared L2 norm over the volume (components summed)."""
        return self.integrate(np.square(f))

    # -- diagnostics ---------------------------------------------------------

    def cheb_coeffs(self, f):
        return np.einsum("ab,ijb->ija", self._coeff_mat, f)

    def tail_fraction(self, f):
        c = np.abs(self.cheb_coeffs(f)).sum(axis=(0, 1))
        return cheb.tail_fraction(c)

    def evaluate_trig(self, mi, ni, phase):
        """cos(kappa.x + phase) sampled on the horizontal grid."""
        kx, ky = self.domain.wavevector(mi, ni)
        arg = kx * self.x[:, None] + ky * self.y[None, :] + phase
        return np.cos(arg)
