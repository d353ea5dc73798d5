"""Truncated dynamics in the slip Stokes eigenbasis.

The velocity is expanded as u = sum_k c_k(t) a_k over an orthonormal
eigenbasis; projecting the momentum equation onto each mode gives

    dc_k/dt = mu lam_k c_k - sum_ij c_i c_j B[k, i, j],

where B[k, i, j] = int <a_k, (a_i . grad) a_j> is the convection tensor.
Because every mode is divergence-free and tangent to the boundary, B is
skew in its outer pair of indices, so convection moves energy between
modes without creating any: the truncated system inherits the energy
identity of the full flow exactly.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import fields, helmholtz


# ---------------------------------------------------------------------------
# convection tensor


@dataclass
class ConvectionTensor:
    """B[k, i, j] = int <a_k, (a_i . grad) a_j> over the basis modes."""

    values: np.ndarray
    labels: tuple
    resolution: str

    def __len__(self):
        return self.values.shape[0]

    def apply(self, c):
        """Quadratic form sum_ij c_i c_j B[., i, j]."""
        return np.einsum("kij,i,j->k", self.values, c, c)

    def skew_defect(self):
        """Largest violation of B[k, i, j] = -B[j, i, k]."""
        return float(np.abs(self.values
                            + self.values.transpose(2, 1, 0)).max())

    def energy_defect(self, c):
        """|sum c_k c_i c_j B[k, i, j]|: exact zero at skew symmetry."""
        cc = np.asarray(c, dtype=float)
        return abs(float(cc @ self.apply(cc)))

    def subset(self, n):
        return ConvectionTensor(values=self.values[:n, :n, :n].copy(),
                                labels=self.labels[:n],
                                resolution=self.resolution)


def _grid_label(grid):
    if grid.domain.name == "channel":
        return f"channel:{grid.nx}x{grid.ny}x{grid.nz}"
    return f"ball:nr{grid.nr},l{grid.lmax}"


def build_convection(grid, basis):
    """Assemble the convection tensor by quadrature.

    Batched over the advected mode: one jacobian per mode j, then all
    (a_i . grad) a_j at once and a single mat-mat against the weighted
    mode stack for the projections.
    """
    v = basis.velocities(grid)
    n = len(basis)
    w = grid.quad_weights
    vw = (v * w).reshape(n, -1)
    b = np.empty((n, n, n))
    for j in range(n):
        jac = fields.jacobian(grid, v[j])
        adv = np.einsum("idg,cdg->icg", v.reshape(n, 3, -1),
                        jac.reshape(3, 3, -1))
        b[:, :, j] = vw @ adv.reshape(n, -1).T
    return ConvectionTensor(values=b, labels=tuple(basis.labels()),
                            resolution=_grid_label(grid))


def boundary_gram(grid, bnd, basis):
    """G[i, j] = int_Gamma <a_i, a_j>: the wall energy in coefficients."""
    tr = np.stack([bnd.trace(u) for u in basis.velocities(grid)])
    n = len(basis)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = bnd.surface_integrate(
                fields.dot(tr[i], tr[j]))
    return g


# ---------------------------------------------------------------------------
# the coefficient system


@dataclass
class GalerkinSystem:
    """Right side of the truncated momentum equation in coefficients."""

    basis: object
    tensor: ConvectionTensor
    mu: float

    def __post_init__(self):
        if len(self.tensor) != len(self.basis):
            raise ValueError("tensor and basis sizes differ")
        self.lam = self.basis.eigenvalues

    def rhs(self, c):
        return self.mu * self.lam * c - self.tensor.apply(c)

    def subset(self, n):
        return GalerkinSystem(basis=self.basis.subset(n),
                              tensor=self.tensor.subset(n), mu=self.mu)


@dataclass
class Trajectory:
    """Saved states of one coefficient integration.

    `wall_flux` accumulates int_0^t int_Gamma |u|^2 along the run and
    `dissipation` accumulates int_0^t sum_k lam_k c_k^2 (the spectral
    value of minus the slip form), both through the same stages as the
    state so they carry the integrator's full order.
    """

    times: np.ndarray
    coeffs: np.ndarray
    wall_flux: np.ndarray
    dissipation: np.ndarray
    mu: float
    dt: float
    blown_up: bool

    def norm2(self):
        """||u||^2 series (the basis is orthonormal)."""
        return np.sum(self.coeffs ** 2, axis=1)

    def reconstruct(self, basis, grid, i):
        return basis.reconstruct(grid, self.coeffs[i])


def integrate_rk4(system, c0, t_final, dt, save_every=1, wall_gram=None,
                  guard=1e8):
    """Classical fourth-order stepping of the coefficient system.

    The final partial step is shortened so the run ends exactly at
    `t_final`.  A norm exceeding `guard` times the initial one aborts the
    run and flags the trajectory instead of overflowing.
    """
    if dt <= 0.0 or t_final <= 0.0:
        raise ValueError("time step and final time must be positive")
    c = np.asarray(c0, dtype=float).copy()
    scale0 = max(1.0, float(np.sqrt(c @ c)))
    lam = system.lam

    def aug_rhs(c):
        dc = system.rhs(c)
        wall = float(c @ wall_gram @ c) if wall_gram is not None else 0.0
        diss = float(lam @ (c * c))
        return dc, wall, diss

    t = 0.0
    wall_acc = 0.0
    diss_acc = 0.0
    times, coeffs, wall, diss = [0.0], [c.copy()], [0.0], [0.0]
    blown = False
    step = 0
    while t < t_final - 1e-12 * t_final:
        h = min(dt, t_final - t)
        k1, w1, d1 = aug_rhs(c)
        k2, w2, d2 = aug_rhs(c + 0.5 * h * k1)
        k3, w3, d3 = aug_rhs(c + 0.5 * h * k2)
        k4, w4, d4 = aug_rhs(c + h * k3)
        c = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        wall_acc += (h / 6.0) * (w1 + 2.0 * w2 + 2.0 * w3 + w4)
        diss_acc += (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        t += h
        step += 1
        if not np.isfinite(c).all() or float(np.sqrt(c @ c)) > guard * scale0:
            blown = True
        if step % save_every == 0 or t >= t_final - 1e-12 * t_final or blown:
            times.append(t)
            coeffs.append(c.copy())
            wall.append(wall_acc)
            diss.append(diss_acc)
        if blown:
            break
    return Trajectory(times=np.array(times), coeffs=np.array(coeffs),
                      wall_flux=np.array(wall), dissipation=np.array(diss),
                      mu=system.mu, dt=dt, blown_up=blown)


def integrate_factored(system, c0, t_final, dt, save_every=1,
                       wall_gram=None, guard=1e8):
    """Integrating-factor variant: the linear part is advanced exactly
    by exp(mu lam h) and only the convection is stepped, so stiff high
    modes do not limit the step.  Interface and outputs match
    `integrate_rk4`.
    """
    if dt <= 0.0 or t_final <= 0.0:
        raise ValueError("time step and final time must be positive")
    c = np.asarray(c0, dtype=float).copy()
    scale0 = max(1.0, float(np.sqrt(c @ c)))
    lam = system.lam
    mu = system.mu

    def conv(c):
        return -system.tensor.apply(c)

    t = 0.0
    wall_acc = 0.0
    diss_acc = 0.0
    times, coeffs, wall, diss = [0.0], [c.copy()], [0.0], [0.0]
    blown = False
    step = 0
    while t < t_final - 1e-12 * t_final:
        h = min(dt, t_final - t)
        e_half = np.exp(mu * lam * (0.5 * h))
        e_full = e_half * e_half
        # RK4 on d' = e^{-mu lam t} N(e^{mu lam t} d) across one step,
        # written in the moving frame so only exponentials of h appear.
        k1 = conv(c)
        k2 = conv(e_half * (c + 0.5 * h * k1)) / e_half
        k3 = conv(e_half * (c + 0.5 * h * k2)) / e_half
        k4 = conv(e_full * (c + h * k3)) / e_full
        d_new = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        # quadrature of the accumulators in the fixed frame (Simpson,
        # matching the stepper's order)
        c_half = e_half * (c + 0.5 * h * k2)
        c_new = e_full * d_new
        if wall_gram is not None:
            wall_acc += (h / 6.0) * (
                float(c @ wall_gram @ c)
                + 4.0 * float(c_half @ wall_gram @ c_half)
                + float(c_new @ wall_gram @ c_new))
        diss_acc += (h / 6.0) * (
            float(lam @ (c * c)) + 4.0 * float(lam @ (c_half * c_half))
            + float(lam @ (c_new * c_new)))
        c = c_new
        t += h
        step += 1
        if not np.isfinite(c).all() or float(np.sqrt(c @ c)) > guard * scale0:
            blown = True
        if step % save_every == 0 or t >= t_final - 1e-12 * t_final or blown:
            times.append(t)
            coeffs.append(c.copy())
            wall.append(wall_acc)
            diss.append(diss_acc)
        if blown:
            break
    return Trajectory(times=np.array(times), coeffs=np.array(coeffs),
                      wall_flux=np.array(wall), dissipation=np.array(diss),
                      mu=system.mu, dt=dt, blown_up=blown)


def integrate_adaptive(system, c0, t_final, rtol=1e-9, atol=1e-12):
    """Adaptive reference integration (for cross-checking the fixed-step
    routes); returns the endpoint coefficients only."""
    from scipy.integrate import solve_ivp
    sol = solve_ivp(lambda t, c: system.rhs(c), (0.0, t_final),
                    np.asarray(c0, dtype=float), method="RK45",
                    rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise RuntimeError(f"adaptive integration failed: {sol.message}")
    return sol.y[:, -1]


# ---------------------------------------------------------------------------
# energy accounting


@dataclass
class EnergyRow:
    t: float
    norm2: float
    ddt_spectral: float
    ddt_centered: float
    grad2: float
    wall2: float
    shape_term: float
    residual_spectral: float
    residual_centered: float


@dataclass
class EnergyReport:
    """Term-by-term balance of the energy identity along a trajectory.

    The identity checked at each sampled time is

        d/dt ||u||^2 + 2 mu ||grad u||^2
            = -(2 mu / zeta) int_Gamma |u|^2 + 2 mu int_Gamma pi(u, u),

    with every right-side term evaluated by quadrature on the
    reconstructed field and the left-side derivative taken two ways:
    spectrally (2 c . dc/dt, exact for the coefficient system) and by
    centered differences of the saved norms (which carries the time
    sampling error and so bounds what an observer of the discrete series
    can certify).  `integrated_residual` checks the time-integrated form
    ||u(T)||^2 - ||u(0)||^2 = 2 mu int_0^T sum lam_k c_k^2 using the
    stage-accumulated dissipation.
    """

    rows: list
    max_residual_spectral: float
    max_residual_centered: float
    integrated_residual: float
    scale: float

    def relative_spectral(self):
        return self.max_residual_spectral / self.scale

    def relative_centered(self):
        return self.max_residual_centered / self.scale


def energy_report(system, traj, grid, bnd, zeta, max_samples=25):
    """Evaluate the energy balance at up to `max_samples` saved states."""
    basis = system.basis
    mu = system.mu
    ns = len(traj.times)
    idx = np.unique(np.linspace(0, ns - 1, min(max_samples, ns)).astype(int))
    norms = traj.norm2()
    rows = []
    scale = 0.0
    for i in idx:
        c = traj.coeffs[i]
        u = basis.reconstruct(grid, c)
        jac = fields.jacobian(grid, u)
        grad2 = grid.integrate(np.einsum("cd...,cd...->...", jac, jac))
        tr = bnd.trace(u)
        wall2 = bnd.surface_integrate(fields.dot(tr, tr))
        shape = bnd.surface_integrate(bnd.pi_form(tr, tr))
        ddt_s = 2.0 * float(c @ system.rhs(c))
        if 0 < i < ns - 1:
            ddt_c = float((norms[i + 1] - norms[i - 1])
                          / (traj.times[i + 1] - traj.times[i - 1]))
        else:
            ddt_c = math.nan
        wall_coef = 0.0 if zeta.is_infinite else 2.0 * mu * zeta.inv
        res_s = ddt_s + 2.0 * mu * grad2 + wall_coef * wall2 \
            - 2.0 * mu * shape
        res_c = math.nan if math.isnan(ddt_c) else \
            ddt_c + 2.0 * mu * grad2 + wall_coef * wall2 - 2.0 * mu * shape
        rows.append(EnergyRow(t=float(traj.times[i]), norm2=float(norms[i]),
                              ddt_spectral=ddt_s, ddt_centered=ddt_c,
                              grad2=grad2, wall2=wall2, shape_term=shape,
                              residual_spectral=res_s,
                              residual_centered=res_c))
        scale = max(scale, abs(ddt_s), 2.0 * mu * grad2,
                    wall_coef * wall2, 2.0 * mu * abs(shape), 1e-30)
    integrated = float(norms[-1] - norms[0] - 2.0 * mu * traj.dissipation[-1])
    finite_c = [abs(r.residual_centered) for r in rows
                if not math.isnan(r.residual_centered)]
    return EnergyReport(
        rows=rows,
        max_residual_spectral=max(abs(r.residual_spectral) for r in rows),
        max_residual_centered=max(finite_c) if finite_c else math.nan,
        integrated_residual=integrated,
        scale=scale)


def weak_form_residual(system, traj, grid, bnd, zeta, i, n_modes=None):
    """Residual of the projected momentum equation at saved state i.

    Tests d/dt<u, a_k> + <(u.grad)u, a_k> + mu E(u, a_k) = 0 for each
    retained mode by quadrature on the reconstructed field, with the
    time derivative taken from the coefficient system.  Returns the
    largest residual relative to the largest term entering it.
    """
    basis = system.basis
    c = traj.coeffs[i]
    u = basis.reconstruct(grid, c)
    dc = system.rhs(c)
    jac = fields.jacobian(grid, u)
    adv = fields.advect(grid, u, u, jac=jac)
    v = basis.velocities(grid)
    n = len(basis) if n_modes is None else min(n_modes, len(basis))
    worst = 0.0
    scale = 1.0
    for k in range(n):
        conv_k = grid.integrate(fields.dot(adv, v[k]))
        energy_k = helmholtz.dirichlet_form(grid, bnd, zeta, u, v[k],
                                            jac=jac)
        res = dc[k] + conv_k + system.mu * energy_k
        worst = max(worst, abs(res))
        scale = max(scale, abs(dc[k]), abs(conv_k),
                    abs(system.mu * energy_k))
    return worst / scale


# ---------------------------------------------------------------------------
# strong-norm growth monitor


@dataclass
class StrongMonitorReport:
    """F(t) = ||(psi, u, u_t)||^2 along a trajectory with the smallest
    constants (m1, m2) making dF/dt <= m1 F + m2 F^2 hold at every
    interior sample."""

    times: np.ndarray
    values: np.ndarray
    m1: float
    m2: float
    margin: float


def strong_monitor(system, traj, grid, max_samples=40):
    """Track the squared strong norm and fit its growth inequality.

    psi = -Lap u^N is assembled in closed form through the basis (each
    mode's Laplacian is lam a + grad p with a closed-form companion), so
    the series is not polluted by numerical third derivatives.
    """
    basis = system.basis
    ns = len(traj.times)
    idx = np.unique(np.linspace(0, ns - 1, min(max_samples, ns)).astype(int))
    tt, ff = [], []
    for i in idx:
        c = traj.coeffs[i]
        psi = -basis.laplacian_image(grid, c)
        ut = basis.reconstruct(grid, system.rhs(c))
        f_val = grid.norm2(psi) + float(c @ c) + grid.norm2(ut)
        tt.append(float(traj.times[i]))
        ff.append(float(f_val))
    tt = np.array(tt)
    ff = np.array(ff)
    if len(tt) < 3:
        raise ValueError("need at least three samples to fit growth")
    dfdt = (ff[2:] - ff[:-2]) / (tt[2:] - tt[:-2])
    fmid = ff[1:-1]
    a = np.column_stack([fmid, fmid ** 2])
    coef, *_ = np.linalg.lstsq(a, dfdt, rcond=None)
    m1, m2 = max(float(coef[0]), 0.0), max(float(coef[1]), 0.0)
    bound = m1 * fmid + m2 * fmid ** 2
    excess = dfdt - bound
    if np.any(excess > 0.0):
        # scale both constants up together until the envelope covers
        # every sample (the fitted pair may sit below outliers)
        denom = fmid + fmid ** 2
        bump = float(np.max(excess / denom))
        m1 += bump
        m2 += bump
        bound = m1 * fmid + m2 * fmid ** 2
    margin = float(np.min(bound - dfdt))
    return StrongMonitorReport(times=tt, values=ff, m1=m1, m2=m2,
                               margin=margin)


def riccati_majorant(rho0, m1, m2):
    """Blow-up horizon of rho' = m1 rho + m2 rho^2, rho(0) = rho0.

    Returns the time at which the majorant leaves every bound; inf when
    the quadratic term or the initial value vanishes.
    """
    if rho0 < 0.0 or m1 < 0.0 or m2 < 0.0:
        raise ValueError("majorant parameters must be nonnegative")
    if m2 == 0.0 or rho0 == 0.0:
        return math.inf
    if m1 == 0.0:
        return 1.0 / (m2 * rho0)
    return math.log1p(m1 / (m2 * rho0)) / m1
