"""Spectral calculus on the ball.

Scalars are sampled on a product grid: Gauss-Legendre nodes in r on
(0, R) (no node at the centre or the surface), Gauss-Legendre nodes in
cos(theta), uniform phi.  Each scalar is expanded per radial shell in
orthonormal complex spherical harmonics; angular transforms are exact
for fields whose harmonic degree stays at or below `lmax`, so grids
must be built with headroom for the degree growth caused by products
and Cartesian derivatives.  Vectors are handled componentwise in
ambient Cartesian coordinates, which keeps every operator a
composition of scalar transforms.
"""

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import eval_jacobi

from . import cheb


def legendre_tables(lmax, mu):
    """Normalised associated Legendre values and theta-derivatives.

    Returns arrays of shape (lmax+1, lmax+1, len(mu)) indexed [l, m]
    (zero for m > l), normalised so Y_lm = P[l,m] * exp(i m phi) is
    orthonormal on the unit sphere.  Condon-Shortley phase included.
    """
    mu = np.asarray(mu, dtype=float)
    sin_t = np.sqrt(1.0 - mu ** 2)
    p = np.zeros((lmax + 1, lmax + 1, len(mu)))
    p[0, 0] = np.sqrt(1.0 / (4.0 * np.pi))
    for m in range(1, lmax + 1):
        p[m, m] = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_t * p[m - 1, m - 1]
    for m in range(lmax):
        p[m + 1, m] = np.sqrt(2.0 * m + 3.0) * mu * p[m, m]
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            p[l, m] = a * (mu * p[l - 1, m] - b * p[l - 2, m])
    pt = np.zeros_like(p)
    for m in range(lmax + 1):
        for l in range(m, lmax + 1):
            c = np.sqrt((2.0 * l + 1.0) * (l * l - m * m) / (2.0 * l - 1.0)) if l > m else 0.0
            low = p[l - 1, m] if l > 0 else 0.0
            pt[l, m] = (l * mu * p[l, m] - c * low) / sin_t
    return p, pt


class BallGrid:
    def __init__(self, domain, nr, lmax, ntheta=None, nphi=None):
        self.domain = domain
        r = domain.radius
        self.nr, self.lmax = nr, lmax
        self.ntheta = ntheta if ntheta is not None else lmax + 2
        self.nphi = nphi if nphi is not None else max(2 * lmax + 2, 8)
        if self.ntheta < lmax + 1 or self.nphi < 2 * lmax + 1:
            raise ValueError("angular grid too coarse for lmax")

        self.rr, self.rw = cheb.gauss_legendre(nr, 0.0, r)
        self.dr_mat = cheb.diff_matrix(self.rr)
        self.surface_row = cheb.interp_row(self.rr, r)
        # Per-degree radial operators in the regular representation.  A
        # field analytic at the centre has degree-l coefficient functions
        # c(r) = s^l G(u) with s = r/R, u = 2 s^2 - 1 and G analytic, and
        # on that subspace the radial factors of gradient and Laplacian
        # have no singular divisions:
        #   dc/dr                        = (l s^(l-1) G + 4 s^(l+1) G') / R
        #   c / r                        = s^(l-1) G / R
        #   c'' + 2c'/r - l(l+1) c/r^2   = ((8l+12) s^l G' + 16 s^(l+2) G'') / R^2
        # G is expanded in Jacobi polynomials P^(0, l+1/2)(u), which are
        # orthogonal under the volume weight r^2 dr, so the conversion
        # from nodal columns is well conditioned.  Because the nodes have
        # distinct radii, nr basis functions interpolate exactly (even
        # powers of r up to 2 nr - 2), so no nodal information is lost.
        # Evaluating the naive formulas nodally instead amplifies
        # transform noise by l(l+1)/r^2 ~ (nr^2/R)^2 at the innermost
        # node.
        s = self.rr / r
        uu = 2.0 * s ** 2 - 1.0
        sqw = self.rr * np.sqrt(self.rw)
        k = np.arange(nr)[None, :]
        self._rad_ns, self._rad_conv = [], []
        self._syn_val, self._syn_dr, self._syn_divr, self._syn_lap = [], [], [], []
        for l in range(lmax + 1):
            jt = eval_jacobi(k, 0.0, l + 0.5, uu[:, None])
            j1 = np.zeros_like(jt)
            j1[:, 1:] = 0.5 * (k[:, 1:] + l + 1.5) \
                * eval_jacobi(k[:, 1:] - 1, 1.0, l + 1.5, uu[:, None])
            j2 = np.zeros_like(jt)
            j2[:, 2:] = 0.25 * (k[:, 2:] + l + 1.5) * (k[:, 2:] + l + 2.5) \
                * eval_jacobi(k[:, 2:] - 2, 2.0, l + 2.5, uu[:, None])
            sl = s[:, None] ** l
            b = sl * jt
            # Largest basis size whose weighted conversion stays well
            # conditioned: beyond ~0.7 nr the node density in u cannot
            # support the polynomial degree and kappa grows exponentially,
            # turning transform noise into O(1) coefficient noise.
            bw = sqw[:, None] * b
            lo, hi = min(8, nr), nr
            while lo < hi:
                mid = (lo + hi + 1) // 2
                if np.linalg.cond(np.linalg.qr(bw[:, :mid])[1]) <= 300.0:
                    lo = mid
                else:
                    hi = mid - 1
            ns = lo
            q, rm = np.linalg.qr(bw[:, :ns])
            self._rad_ns.append(ns)
            self._rad_conv.append(solve_triangular(rm, q.T) * sqw[None, :])
            bovr = s[:, None] ** (l - 1) * jt / r if l else np.zeros_like(jt)
            bdr = l * bovr + 4.0 * s[:, None] ** (l + 1) * j1 / r
            blap = ((8.0 * l + 12.0) * sl * j1
                    + 16.0 * s[:, None] ** (l + 2) * j2) / r ** 2
            self._syn_val.append(b[:, :ns])
            self._syn_dr.append(bdr[:, :ns])
            self._syn_divr.append(bovr[:, :ns])
            self._syn_lap.append(blap[:, :ns])
        # Trailing regular coefficients below this relative level are
        # rounding noise; differentiation amplifies slot k by ~k^4, so
        # they must be cleared against the global coefficient scale.
        self._coef_rel = 1e-13

        self.mu, self.muw = np.polynomial.legendre.leggauss(self.ntheta)
        self.sin_t = np.sqrt(1.0 - self.mu ** 2)
        self.phi = 2.0 * np.pi * np.arange(self.nphi) / self.nphi
        self.p_tab, self.pt_tab = legendre_tables(lmax, self.mu)

        ct, st = self.mu[:, None], self.sin_t[:, None]
        cp, sp = np.cos(self.phi)[None, :], np.sin(self.phi)[None, :]
        self.rhat = np.stack([st * cp, st * sp, ct * np.ones_like(cp)])
        self.that = np.stack([ct * cp, ct * sp, -st * np.ones_like(cp)])
        self.phat = np.stack([-sp * np.ones_like(ct), cp * np.ones_like(ct),
                              np.zeros((self.ntheta, self.nphi))])

        # per-m synthesis blocks (n_l, ntheta) and weighted analysis blocks
        self._synth_p = [self.p_tab[m:, m, :] for m in range(lmax + 1)]
        self._synth_pt = [self.pt_tab[m:, m, :] for m in range(lmax + 1)]
        self._anal_p = [2.0 * np.pi * (self.muw[None, :] * self.p_tab[m:, m, :]).T
                        for m in range(lmax + 1)]
        self._wvol = self.rw[:, None] * self.rr[:, None] ** 2 \
            * self.muw[None, :] * (2.0 * np.pi / self.nphi)
        self._wsurf = r ** 2 * self.muw[:, None] \
            * np.full((1, self.nphi), 2.0 * np.pi / self.nphi)

    # -- spherical harmonic transforms (batched over leading axes) ----------

    def sht(self, f):
        """Forward transform: (..., ntheta, nphi) -> (..., lmax+1, lmax+1).

        Coefficients are indexed [l, m] for m >= 0; negative m follows
        from reality of the field.
        """
        a = np.fft.rfft(f, axis=-1) / self.nphi
        lm = self.lmax + 1
        c = np.zeros(f.shape[:-2] + (lm, lm), dtype=complex)
        for m in range(lm):
            c[..., m:, m] = a[..., :, m] @ self._anal_p[m]
        return c

    def _synth(self, c, tables, factor=None):
        lm = self.lmax + 1
        nf = self.nphi // 2 + 1
        fh = np.zeros(c.shape[:-2] + (self.ntheta, nf), dtype=complex)
        for m in range(lm):
            block = c[..., m:, m]
            if factor is not None:
                block = block * factor(m)
            fh[..., :, m] = block @ tables[m]
        return np.fft.irfft(fh * self.nphi, n=self.nphi, axis=-1)

    def isht(self, c):
        return self._synth(c, self._synth_p)

    def isht_dtheta(self, c):
        return self._synth(c, self._synth_pt)

    def isht_dphi(self, c):
        """Synthesis of (1/sin theta) * d/dphi."""
        return self._synth(c, self._synth_p, factor=lambda m: 1j * m) / self.sin_t[:, None]

    # -- volume calculus -----------------------------------------------------

    def _rad_coeffs(self, c):
        """Regular radial coefficients of harmonic columns, with trailing
        rounding noise cleared against the global coefficient scale."""
        bb = np.zeros_like(c)
        for l in range(self.lmax + 1):
            bb[:self._rad_ns[l], l, :] = self._rad_conv[l] @ c[:, l, :]
        clip = self._coef_rel * np.abs(bb).max() if bb.size else 0.0
        return np.where(np.abs(bb) >= clip, bb, 0.0)

    def _syn_apply(self, tables, bb):
        out = np.empty_like(bb)
        for l in range(self.lmax + 1):
            out[:, l, :] = tables[l] @ bb[:self._rad_ns[l], l, :]
        return out

    def _regularize(self, c):
        """Project harmonic coefficient columns onto their regular radial
        subspace (r^l times an even analytic factor)."""
        return self._syn_apply(self._syn_val, self._rad_coeffs(c))

    def gradient(self, f):
        bb = self._rad_coeffs(self.sht(f))
        cr = self._syn_apply(self._syn_dr, bb)
        cor = self._syn_apply(self._syn_divr, bb)
        fr = self.isht(cr)
        ft = self.isht_dtheta(cor)
        fp = self.isht_dphi(cor)
        return (fr[None] * self.rhat[:, None] + ft[None] * self.that[:, None]
                + fp[None] * self.phat[:, None])

    def dx(self, f):
        return self.gradient(f)[0]

    def dy(self, f):
        return self.gradient(f)[1]

    def dz(self, f):
        return self.gradient(f)[2]

    def laplacian(self, f):
        return self.isht(self._syn_apply(self._syn_lap, self._rad_coeffs(self.sht(f))))

    def integrate(self, f):
        s = f.reshape(-1, self.nr, self.ntheta, self.nphi).sum(axis=0)
        return float(np.einsum("abc,ab->", s, self._wvol))

    @property
    def quad_weights(self):
        """Pointwise quadrature weights: integrate(f) == sum(f * w)."""
        return np.broadcast_to(self._wvol[:, :, None],
                               (self.nr, self.ntheta, self.nphi))

    def norm2(self, f):
        return self.integrate(np.square(f))

    # -- surface --------------------------------------------------------------

    def trace(self, f):
        """Boundary values at r = R, shape (..., ntheta, nphi)."""
        return np.tensordot(self.surface_row, f, axes=(0, f.ndim - 3))

    def trace_dr(self, f):
        return np.tensordot(self.surface_row @ self.dr_mat, f, axes=(0, f.ndim - 3))

    def surface_integrate(self, fs):
        s = fs.reshape(-1, self.ntheta, self.nphi).sum(axis=0)
        return float(np.einsum("ab,ab->", s, self._wsurf))

    def tail_fraction(self, f):
        """Spectral-tail diagnostic: mass in the top quartile of the
        harmonic-degree spectrum (angular under-resolution shows up
        here as aliasing into high l)."""
        c = self.sht(f)
        per_l = np.sqrt(np.sum(np.abs(c) ** 2, axis=(0, 2)))
        return cheb.tail_fraction(per_l)
