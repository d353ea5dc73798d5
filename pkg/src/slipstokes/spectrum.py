"""Stokes eigenmodes compatible with the slip boundary condition.

Channel families (horizontal wavevector kappa, walls z = 0, 1):

* shear (kappa = 0): u = f(z) e_h.  The slip condition at the walls
  reduces to f'(1) = -f(1)/zeta and f'(0) = +f(0)/zeta, so profiles
  split by parity about z = 1/2:

      even   f = cos(k (z - 1/2)),   k tan(k/2) = 1/zeta,
      odd    f = sin(k (z - 1/2)),   k cot(k/2) = -1/zeta,

  with lambda = -k^2.  Complete slip gives k in {0, 2 pi, ...} (even)
  and {pi, 3 pi, ...} (odd); the k = 0 root is the constant stream.
* toroidal (kappa != 0, zero normal velocity): u proportional to
  kappa-perp times g(z) cos(kappa.x + phase) with the same Robin roots
  for g and lambda = -k^2 - |kappa|^2.
* poloidal (kappa != 0, nonzero normal velocity): vertical profile w
  solves (D^2-|kappa|^2)^2 w = lambda (D^2-|kappa|^2) w with w = 0 and
  w'' = -+ w'/zeta at the walls (sign flips at z = 0).  Writing
  s = (D^2-|kappa|^2) w the profile takes the closed form

      w = trig(beta (z - 1/2)) + hyperbolic kernel part,
      s = lam trig(beta (z - 1/2)),    beta^2 = -lam - |kappa|^2,

  split by parity about z = 1/2; eigenvalues are roots of a scalar
  dispersion function, located by a collocation enumerator (vetted by
  resolution doubling) and polished by bracketed root refinement.  The
  pressure companion is harmonic: a pure sinh/cosh profile.

Ball family (toroidal sector): u = grad(j_l(k r) Y_lm) x X with
lambda = -k^2, pressure companion identically zero, and the slip
condition reducing to k j_l'(kR) + (1/zeta - 1/R) j_l(kR) = 0.  At
complete slip the l = 1, k -> 0 limit modes are the rigid rotations.
"""

import json
import math
import os

import numpy as np
from scipy.linalg import eig
from scipy.optimize import brentq
from scipy.special import spherical_jn

from . import cheb
from .channel import ChannelGrid
from .ball import BallGrid
from .domain import Ball, Channel, SlipLength, parse_zeta

CACHE_VERSION = 1
FAMILY_ORDER = {"shear": 0, "toroidal": 1, "poloidal": 2, "ball_toroidal": 3}


# ---------------------------------------------------------------------------
# Robin roots for the flat-wall profiles


def shear_root(zeta, j):
    """j-th vertical wavenumber (ascending) of the Robin profile family.

    Even-parity roots live in (2n pi, (2n+1) pi), odd-parity roots in
    ((2n-1) pi, 2n pi); interleaving them ascending gives index j with
    parity 'even' for even j.  Returns (k, parity).
    """
    if j % 2 == 0:
        n = j // 2
        if zeta.is_infinite:
            return 2.0 * n * np.pi, "even"
        f = lambda k: k * np.sin(k / 2.0) - zeta.inv * np.cos(k / 2.0)
        return brentq(f, 2.0 * n * np.pi, (2.0 * n + 1.0) * np.pi, xtol=4e-16,
                      rtol=8.9e-16), "even"
    n = (j + 1) // 2
    if zeta.is_infinite:
        return (2.0 * n - 1.0) * np.pi, "odd"
    f = lambda k: k * np.cos(k / 2.0) + zeta.inv * np.sin(k / 2.0)
    return brentq(f, (2.0 * n - 1.0) * np.pi, 2.0 * n * np.pi, xtol=4e-16,
                  rtol=8.9e-16), "odd"


def ball_roots(zeta, radius, l, count):
    """First `count` radial wavenumbers for the degree-l toroidal family."""
    roots = []
    if zeta.is_infinite and l == 1:
        roots.append(0.0)  # rigid rotation
    c = zeta.inv - 1.0 / radius

    def disp(k):
        return k * spherical_jn(l, k * radius, derivative=True) + c * spherical_jn(l, k * radius)

    kmax = (count + l / 2.0 + 3.0) * np.pi / radius
    grid = np.linspace(1e-6, kmax, int(40 * (count + l + 3)))
    vals = disp(grid)
    for i in range(len(grid) - 1):
        if len(roots) >= count:
            break
        if vals[i] == 0.0:
            roots.append(grid[i])
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(brentq(disp, grid[i], grid[i + 1], xtol=4e-16, rtol=8.9e-16))
    return roots[:count]


# ---------------------------------------------------------------------------
# mode classes


def _profile(k, parity, z):
    if parity == "even":
        return np.cos(k * (z - 0.5))
    return np.sin(k * (z - 0.5))


def _profile_d(k, parity, z):
    if parity == "even":
        return -k * np.sin(k * (z - 0.5))
    return k * np.cos(k * (z - 0.5))


class ShearMode:
    family = "shear"

    def __init__(self, component, j, k, parity, amplitude=1.0):
        self.component = component  # 0 -> x polarisation, 1 -> y
        self.j = j
        self.k = k
        self.parity = parity
        self.amplitude = amplitude
        self.lam = -k * k
        self.kappa_index = (0, 0)

    @property
    def label(self):
        return f"shear:{'xy'[self.component]}:{self.j}"

    def sort_key(self):
        return (-self.lam, FAMILY_ORDER[self.family], 0, 0, self.j, self.component)

    def velocity(self, grid):
        u = np.zeros((3, grid.nx, grid.ny, grid.nz))
        u[self.component] = self.amplitude * _profile(self.k, self.parity, grid.z)[None, None, :]
        return u

    def pressure(self, grid):
        return None

    def to_record(self):
        return {"family": self.family, "component": self.component, "j": self.j,
                "k": self.k, "parity": self.parity, "amplitude": self.amplitude,
                "lam": self.lam}

    @classmethod
    def from_record(cls, rec):
        m = cls(rec["component"], rec["j"], rec["k"], rec["parity"], rec["amplitude"])
        m.lam = rec["lam"]
        return m


class ToroidalMode:
    family = "toroidal"

    def __init__(self, domain, mi, ni, phase, j, k, parity, amplitude=1.0):
        self.mi, self.ni, self.phase, self.j = mi, ni, phase, j
        self.k, self.parity = k, parity
        self.amplitude = amplitude
        kx, ky = domain.wavevector(mi, ni)
        self.kap2 = kx * kx + ky * ky
        self.lam = -k * k - self.kap2
        self.kappa_index = (mi, ni)

    @property
    def label(self):
        ph = "c" if self.phase == 0.0 else "s"
        return f"tor:{self.mi},{self.ni}:{ph}:{self.j}"

    def sort_key(self):
        return (-self.lam, FAMILY_ORDER[self.family], self.mi, self.ni, self.j, self.phase)

    def velocity(self, grid):
        kx, ky = grid.domain.wavevector(self.mi, self.ni)
        norm = math.sqrt(self.kap2)
        trig = grid.evaluate_trig(self.mi, self.ni, self.phase)[:, :, None]
        prof = _profile(self.k, self.parity, grid.z)[None, None, :]
        u = np.zeros((3, grid.nx, grid.ny, grid.nz))
        u[0] = self.amplitude * (ky / norm) * trig * prof
        u[1] = -self.amplitude * (kx / norm) * trig * prof
        return u

    def pressure(self, grid):
        return None

    def to_record(self):
        return {"family": self.family, "mi": self.mi, "ni": self.ni,
                "phase": self.phase, "j": self.j, "k": self.k,
                "parity": self.parity, "amplitude": self.amplitude, "lam": self.lam}

    @classmethod
    def from_record(cls, rec, domain):
        m = cls(domain, rec["mi"], rec["ni"], rec["phase"], rec["j"], rec["k"],
                rec["parity"], rec["amplitude"])
        m.lam = rec["lam"]
        return m


def _hyp_ratios(q, z):
    """Stable cosh(q(z-1/2))/denominator ratios on z in [0, 1].

    Returns (cosh_ratio_c, sinh_ratio_c, sinh_ratio_s, cosh_ratio_s)
    with denominators cosh(q/2) for *_c and sinh(q/2) for *_s, written
    with decaying exponentials only so large q never overflows.
    """
    e1 = np.exp(q * (z - 1.0))
    e2 = np.exp(-q * z)
    dp = 1.0 + np.exp(-q)
    dm = 1.0 - np.exp(-q)
    return (e1 + e2) / dp, (e1 - e2) / dp, (e1 - e2) / dm, (e1 + e2) / dm


class PoloidalMode:
    family = "poloidal"

    def __init__(self, domain, mi, ni, phase, j, lam, beta, parity, amplitude=1.0):
        self.mi, self.ni, self.phase, self.j = mi, ni, phase, j
        self.lam = lam
        self.beta = beta
        self.parity = parity
        self.amplitude = amplitude
        kx, ky = domain.wavevector(mi, ni)
        self.kap2 = kx * kx + ky * ky
        self.kappa_index = (mi, ni)

    @property
    def label(self):
        ph = "c" if self.phase == 0.0 else "s"
        return f"pol:{self.mi},{self.ni}:{ph}:{self.j}"

    def sort_key(self):
        return (-self.lam, FAMILY_ORDER[self.family], self.mi, self.ni, self.j, self.phase)

    def _profiles(self, z):
        """Vertical profiles (w, w', P) of the closed-form eigenmode."""
        b, q = self.beta, math.sqrt(self.kap2)
        zz = z - 0.5
        rc, rsc, rss, rcs = _hyp_ratios(q, z)
        if self.parity == "even":
            cb = math.cos(0.5 * b)
            w = np.cos(b * zz) - cb * rc
            wp = -b * np.sin(b * zz) - q * cb * rsc
            pz = (self.lam * cb / q) * rsc
        else:
            sb = math.sin(0.5 * b)
            w = np.sin(b * zz) - sb * rss
            wp = b * np.cos(b * zz) - q * sb * rcs
            pz = (self.lam * sb / q) * rcs
        return w, wp, pz

    def velocity(self, grid):
        kx, ky = grid.domain.wavevector(self.mi, self.ni)
        w, wp, _ = self._profiles(grid.z)
        cosx = grid.evaluate_trig(self.mi, self.ni, self.phase)[:, :, None]
        sinx = grid.evaluate_trig(self.mi, self.ni, self.phase - 0.5 * np.pi)[:, :, None]
        u = np.empty((3, grid.nx, grid.ny, grid.nz))
        u[0] = -self.amplitude * (kx / self.kap2) * wp[None, None, :] * sinx
        u[1] = -self.amplitude * (ky / self.kap2) * wp[None, None, :] * sinx
        u[2] = self.amplitude * w[None, None, :] * cosx
        return u

    def pressure(self, grid):
        # Delta u - lam u = grad p with p = P(z) cos(kappa.x + phase);
        # P = (s' - lam w')/|kappa|^2 collapses to a harmonic profile.
        _, _, pz = self._profiles(grid.z)
        cosx = grid.evaluate_trig(self.mi, self.ni, self.phase)[:, :, None]
        return self.amplitude * pz[None, None, :] * cosx

    def to_record(self):
        return {"family": self.family, "mi": self.mi, "ni": self.ni,
                "phase": self.phase, "j": self.j, "lam": self.lam,
                "beta": self.beta, "parity": self.parity,
                "amplitude": self.amplitude}

    @classmethod
    def from_record(cls, rec, domain):
        return cls(domain, rec["mi"], rec["ni"], rec["phase"], rec["j"],
                   rec["lam"], rec["beta"], rec["parity"], rec["amplitude"])


class BallToroidalMode:
    family = "ball_toroidal"

    def __init__(self, l, m, part, n, k, amplitude=1.0):
        self.l, self.m, self.part, self.n = l, m, part, n
        self.k = k
        self.amplitude = amplitude
        self.lam = -k * k
        self.kappa_index = (l, m)

    @property
    def label(self):
        return f"ballT:l{self.l}:m{self.m}{self.part}:{self.n}"

    def sort_key(self):
        return (-self.lam, FAMILY_ORDER[self.family], self.l, self.m, self.n,
                0.0 if self.part == "c" else 1.0)

    def _radial(self, r):
        if self.k == 0.0:
            return r  # rigid rotation limit of j_1(kr)
        return spherical_jn(self.l, self.k * r)

    def velocity(self, grid):
        l, m = self.l, self.m
        f = self._radial(grid.rr)[:, None, None]
        pbar = grid.p_tab[l, m][:, None]
        ptheta = grid.pt_tab[l, m][:, None]
        if self.part == "c":
            ang, dang = np.cos(m * grid.phi)[None, :], -m * np.sin(m * grid.phi)[None, :]
        else:
            ang, dang = np.sin(m * grid.phi)[None, :], m * np.cos(m * grid.phi)[None, :]
        dy_dphi_over_sin = pbar * dang / grid.sin_t[:, None]
        dy_dtheta = ptheta * ang
        # u = f(r) * ( (dY/dphi / sin) that - (dY/dtheta) phat )
        u = (f[None] * dy_dphi_over_sin[None] * grid.that[:, None]
             - f[None] * dy_dtheta[None] * grid.phat[:, None])
        return self.amplitude * u

    def pressure(self, grid):
        return None

    def to_record(self):
        return {"family": self.family, "l": self.l, "m": self.m, "part": self.part,
                "n": self.n, "k": self.k, "amplitude": self.amplitude, "lam": self.lam}

    @classmethod
    def from_record(cls, rec):
        mode = cls(rec["l"], rec["m"], rec["part"], rec["n"], rec["k"], rec["amplitude"])
        mode.lam = rec["lam"]
        return mode


# ---------------------------------------------------------------------------
# poloidal collocation solver


def poloidal_profiles(zeta, kap2, count, nodes=64):
    """Eigenvalues of the poloidal problem, as (lam, beta, parity).

    A collocation enumerator locates candidates at two resolutions and
    keeps eigenvalues agreeing to 1e-6 relative (filtering the spurious
    modes introduced by the boundary rows); each survivor is then
    sharpened to machine precision as a bracketed root of the parity's
    scalar dispersion function.  Sorted by lambda descending.
    """
    fine = _poloidal_eig(zeta, kap2, nodes)
    coarse = _poloidal_eig(zeta, kap2, nodes // 2)
    out = []
    for lam, parity in fine:
        ok = any(abs(lam - lc) <= 1e-6 * max(1.0, abs(lam)) and parity == pc
                 for lc, pc in coarse)
        if not ok:
            continue
        lam = _refine_poloidal(zeta, kap2, parity, lam)
        out.append((lam, math.sqrt(-lam - kap2), parity))
        if len(out) >= count:
            break
    if len(out) < count:
        raise RuntimeError("poloidal solver: not enough converged modes; raise nodes")
    out.sort(key=lambda t: -t[0])
    return out


def poloidal_dispersion(zeta, kap2, parity):
    """Scalar function of lambda whose roots (below -|kappa|^2) are the
    poloidal eigenvalues of the given parity."""
    q = math.sqrt(kap2)
    tq = math.tanh(0.5 * q)

    def g(lam):
        beta = math.sqrt(-lam - kap2)
        if parity == "even":
            return (lam * math.cos(0.5 * beta)
                    - zeta.inv * (beta * math.sin(0.5 * beta)
                                  + q * tq * math.cos(0.5 * beta)))
        return (lam * math.sin(0.5 * beta)
                + zeta.inv * (beta * math.cos(0.5 * beta)
                              - q / tq * math.sin(0.5 * beta)))

    return g


def _refine_poloidal(zeta, kap2, parity, lam):
    """Polish an enumerator eigenvalue against the dispersion function."""
    g = poloidal_dispersion(zeta, kap2, parity)
    hi_cap = -kap2 - 1e-9 * max(1.0, kap2)
    scale = max(1.0, abs(lam))
    for d in (1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2):
        lo, hi = lam - d * scale, min(lam + d * scale, hi_cap)
        if lo < hi and g(lo) * g(hi) < 0.0:
            return brentq(g, lo, hi, xtol=1e-13 * scale, rtol=8.9e-16)
    raise RuntimeError("poloidal dispersion root not bracketed near enumerator value")


def _poloidal_eig(zeta, kap2, nodes):
    """Collocation enumeration of poloidal eigenvalues, with parity.

    With s = w'' - |kappa|^2 w the fourth-order problem becomes

        (D^2 - |kappa|^2) s = lam s,     s = (D^2 - |kappa|^2) w,

    which avoids squaring the differentiation matrix (roundoff there
    grows like nodes^8).  The wall rows impose w = 0 on the definition
    block and the slip rows s -+ w'/zeta = 0 on the eigen block.
    Returns (lam, parity) pairs sorted by lambda descending.
    """
    n = nodes
    z = cheb.gauss_lobatto(n)
    d1 = cheb.diff_matrix(z)
    lap = d1 @ d1 - kap2 * np.eye(n)
    a = np.zeros((2 * n, 2 * n))
    b = np.zeros((2 * n, 2 * n))
    a[:n, :n] = lap
    a[:n, n:] = -np.eye(n)
    a[0] = 0.0
    a[0, 0] = 1.0
    a[n - 1] = 0.0
    a[n - 1, n - 1] = 1.0
    a[n:, n:] = lap
    b[n + 1:2 * n - 1, n + 1:2 * n - 1] = np.eye(n - 2)
    a[n] = 0.0
    a[n, :n] = -zeta.inv * d1[0]          # w''(0) - w'(0)/zeta = 0
    a[n, n] = 1.0
    a[2 * n - 1] = 0.0
    a[2 * n - 1, :n] = zeta.inv * d1[-1]  # w''(1) + w'(1)/zeta = 0
    a[2 * n - 1, 2 * n - 1] = 1.0
    # row equilibration (same pencil, much better QZ backward error when
    # 1/zeta makes the slip rows heavy)
    scale = 1.0 / np.abs(a).max(axis=1)
    a *= scale[:, None]
    b *= scale[:, None]
    vals, vecs = eig(a, b)
    out = []
    for i in range(len(vals)):
        lam = vals[i]
        if not np.isfinite(lam):
            continue
        if abs(lam.imag) > 1e-8 * max(1.0, abs(lam.real)):
            continue
        lam = float(lam.real)
        if lam >= -kap2 or lam < -1e7:
            continue
        w = np.real(vecs[:n, i])
        flip = w[::-1]
        parity = "even" if np.linalg.norm(w - flip) < np.linalg.norm(w + flip) else "odd"
        out.append((lam, parity))
    out.sort(key=lambda t: -t[0])
    return out


# ---------------------------------------------------------------------------
# basis container


class EigenBasis:
    def __init__(self, domain, zeta, modes, cutoffs):
        self.domain = domain
        self.zeta = zeta
        self.modes = sorted(modes, key=lambda m: m.sort_key())
        self.cutoffs = dict(cutoffs)
        self._vel_cache = {}

    def __len__(self):
        return len(self.modes)

    @property
    def eigenvalues(self):
        return np.array([m.lam for m in self.modes])

    @property
    def lambda_hat(self):
        """Positive part of the top eigenvalue (0 when the spectrum is
        nonpositive, which the sign criterion pi <= 1/zeta guarantees)."""
        return max(0.0, float(self.eigenvalues.max()))

    def labels(self):
        return [m.label for m in self.modes]

    def velocities(self, grid):
        key = id(grid)
        if key not in self._vel_cache:
            self._vel_cache[key] = np.stack([m.velocity(grid) for m in self.modes])
        return self._vel_cache[key]

    def gram(self, grid):
        v = self.velocities(grid)
        n = len(self.modes)
        g = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                g[i, j] = g[j, i] = grid.integrate(np.sum(v[i] * v[j], axis=0))
        return g

    def project(self, grid, u):
        v = self.velocities(grid)
        return np.array([grid.integrate(np.sum(vi * u, axis=0)) for vi in v])

    def reconstruct(self, grid, c):
        v = self.velocities(grid)
        return np.tensordot(np.asarray(c), v, axes=(0, 0))

    def laplacian_image(self, grid, c):
        """Closed-form Laplacian of ``reconstruct(c)``.

        Each mode satisfies Lap a = lam a + grad p with its pressure
        companion p, so the image needs no numerical second derivative:
        only one gradient of a smooth closed-form scalar enters.
        """
        c = np.asarray(c, dtype=float)
        out = self.reconstruct(grid, c * self.eigenvalues)
        p = None
        for ci, m in zip(c, self.modes):
            pm = m.pressure(grid)
            if pm is not None:
                p = ci * pm if p is None else p + ci * pm
        if p is not None:
            out = out + grid.gradient(p)
        return out

    def subset(self, n):
        sub = EigenBasis(self.domain, self.zeta, self.modes[:n], self.cutoffs)
        return sub

    # -- serialisation -------------------------------------------------------

    def to_payload(self):
        dom = {"name": self.domain.name}
        if self.domain.name == "channel":
            dom.update(lx=self.domain.lx, ly=self.domain.ly)
        else:
            dom.update(radius=self.domain.radius)
        return {
            "version": CACHE_VERSION,
            "domain": dom,
            "zeta": "inf" if self.zeta.is_infinite else self.zeta.value,
            "cutoffs": self.cutoffs,
            "modes": [m.to_record() for m in self.modes],
        }

    @classmethod
    def from_payload(cls, payload):
        if payload["version"] != CACHE_VERSION:
            raise ValueError("cache version mismatch")
        dom = payload["domain"]
        if dom["name"] == "channel":
            domain = Channel(lx=dom["lx"], ly=dom["ly"])
        else:
            domain = Ball(radius=dom["radius"])
        zeta = parse_zeta(payload["zeta"])
        modes = []
        for rec in payload["modes"]:
            fam = rec["family"]
            if fam == "shear":
                modes.append(ShearMode.from_record(rec))
            elif fam == "toroidal":
                modes.append(ToroidalMode.from_record(rec, domain))
            elif fam == "poloidal":
                modes.append(PoloidalMode.from_record(rec, domain))
            else:
                modes.append(BallToroidalMode.from_record(rec))
        return cls(domain, zeta, modes, payload["cutoffs"])

    def save(self, path):
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "w") as fh:
            json.dump(self.to_payload(), fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_payload(json.load(fh))


def cache_path(domain, zeta, cutoffs, directory=None):
    directory = directory or os.environ.get("SLIPSTOKES_CACHE", ".slipstokes_cache")
    if domain.name == "channel":
        dom = f"channel_lx{domain.lx!r}_ly{domain.ly!r}"
    else:
        dom = f"ball_r{domain.radius!r}"
    name = f"{dom}_z{zeta}_k{cutoffs['kappa']}_n{cutoffs['n']}_v{CACHE_VERSION}.json"
    return os.path.join(directory, name.replace("/", "_"))


def load_or_build(domain, zeta, cutoff_kappa, cutoff_n, directory=None,
                  **kwargs):
    """Load a cached basis when one exists, else build and cache it."""
    path = cache_path(domain, zeta,
                      {"kappa": cutoff_kappa, "n": cutoff_n}, directory)
    if os.path.exists(path):
        return EigenBasis.load(path)
    basis = build_basis(domain, zeta, cutoff_kappa, cutoff_n, **kwargs)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    basis.save(path)
    return basis


# ---------------------------------------------------------------------------
# construction


def half_lattice(kmax):
    """Deterministic half of the integer lattice (one of each +-kappa pair)."""
    out = []
    for mi in range(0, kmax + 1):
        for ni in range(-kmax, kmax + 1):
            if mi == 0 and ni <= 0:
                continue
            out.append((mi, ni))
    return out


def default_grid(domain, cutoffs, factor=1):
    """Evaluation grid adequate for quadratic quadrature of basis modes;
    `factor` >= 3/2 upgrades it for cubic (tensor) quadrature."""
    if domain.name == "channel":
        kmax = 2 * cutoffs["kappa"] + 1
        nh = int(factor * kmax) + 2
        if nh % 2 == 0:
            nh += 1
        kz = (cutoffs["n"] + 1) * np.pi
        nz = max(int(factor * kz) + 28, 72)
        return ChannelGrid(domain, nh, nh, nz)
    lmax = int(2 * factor * cutoffs["kappa"]) + 6
    kz = ball_k_max(cutoffs)
    nr = int(factor * kz * domain.radius / 2.0) + 24
    return BallGrid(domain, nr, lmax)


def ball_k_max(cutoffs):
    return (cutoffs["n"] + cutoffs["kappa"] / 2.0 + 2.0) * np.pi


def build_basis(domain, zeta, cutoff_kappa, cutoff_n, poloidal_nodes=64):
    """Enumerate, solve and normalise the eigenmode families."""
    cutoffs = {"kappa": cutoff_kappa, "n": cutoff_n}
    modes = []
    if domain.name == "channel":
        for j in range(cutoff_n):
            k, parity = shear_root(zeta, j)
            modes.append(ShearMode(0, j, k, parity))
            modes.append(ShearMode(1, j, k, parity))
        for (mi, ni) in half_lattice(cutoff_kappa):
            kx, ky = domain.wavevector(mi, ni)
            kap2 = kx * kx + ky * ky
            pol = poloidal_profiles(zeta, kap2, cutoff_n, nodes=poloidal_nodes)
            for phase in (0.0, 0.5 * np.pi):
                for j in range(cutoff_n):
                    k, parity = shear_root(zeta, j)
                    modes.append(ToroidalMode(domain, mi, ni, phase, j, k, parity))
                for j, (lam, beta, parity) in enumerate(pol):
                    modes.append(PoloidalMode(domain, mi, ni, phase, j, lam, beta, parity))
    else:
        for l in range(1, cutoff_kappa + 1):
            roots = ball_roots(zeta, domain.radius, l, cutoff_n)
            for n, k in enumerate(roots):
                for m in range(0, l + 1):
                    modes.append(BallToroidalMode(l, m, "c", n, k))
                    if m > 0:
                        modes.append(BallToroidalMode(l, m, "s", n, k))
    basis = EigenBasis(domain, zeta, modes, cutoffs)
    _normalise(basis)
    return basis


def _normalise(basis):
    grid = default_grid(basis.domain, basis.cutoffs)
    for m in basis.modes:
        u = m.velocity(grid)
        m.amplitude = m.amplitude / math.sqrt(grid.norm2(u))
    basis._vel_cache.clear()
    # orthonormalise inside degenerate eigenvalue clusters (deterministic
    # order fixed by the mode sort); a no-op when already orthogonal
    modes = basis.modes
    i = 0
    while i < len(modes):
        jj = i + 1
        while jj < len(modes) and abs(modes[jj].lam - modes[i].lam) <= 1e-9 * (1.0 + abs(modes[i].lam)):
            jj += 1
        if jj - i > 1:
            block = [m.velocity(grid) for m in modes[i:jj]]
            for a in range(i, jj):
                ua = block[a - i]
                for b in range(i, a):
                    ov = grid.integrate(np.sum(block[b - i] * ua, axis=0))
                    if abs(ov) > 1e-12:
                        raise RuntimeError(
                            f"degenerate cluster {modes[b].label}/{modes[a].label} "
                            f"not structurally orthogonal (overlap {ov:.2e})")
        i = jj
    return basis


# ---------------------------------------------------------------------------
# validation


def validate_basis(basis, grid=None, helmholtz_mod=None):
    """Invariant report: eigen-residual, slip-condition trace, Gram
    defect, unit norms, divergence, normal trace, sign criterion."""
    from . import fields, geometry
    from . import helmholtz as hh

    grid = grid or default_grid(basis.domain, basis.cutoffs)
    bnd = geometry.make_boundary(grid)
    v = basis.velocities(grid)
    n = len(basis.modes)
    report = {"n_modes": n, "lambda_hat": basis.lambda_hat,
              "lambda_max": float(basis.eigenvalues.max())}

    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = grid.integrate(np.sum(v[i] * v[j], axis=0))
    report["gram_defect"] = float(np.abs(g - np.eye(n)).max())
    report["norm_defect"] = float(np.abs(np.sqrt(np.diag(g)) - 1.0).max())

    eig_res = div_res = trace_res = navier_res = dirich_res = 0.0
    for i, m in enumerate(basis.modes):
        u = v[i]
        jac = fields.jacobian(grid, u)
        div_res = max(div_res, float(np.abs(fields.divergence(grid, u, jac)).max()))
        trace_res = max(trace_res, float(np.abs(bnd.normal_trace(bnd.trace(u))).max()))
        navier_res = max(navier_res, float(np.abs(geometry.navier_residual(bnd, u, basis.zeta)).max()))
        lap = fields.vector_laplacian(grid, u)
        p = m.pressure(grid)
        res = lap - m.lam * u
        if p is not None:
            res = res - grid.gradient(p)
        eig_res = max(eig_res, math.sqrt(grid.norm2(res)))
        e_val = hh.dirichlet_form(grid, bnd, basis.zeta, u, u, jac=jac)
        dirich_res = max(dirich_res, abs(e_val + m.lam))
    report.update(eigen_residual=eig_res, divergence=div_res,
                  normal_trace=trace_res, navier_trace=navier_res,
                  dirichlet_defect=dirich_res)
    return report
