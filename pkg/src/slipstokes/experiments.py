"""Verification campaigns: spectra, identity suites, wall-friction and
vanishing-viscosity limits, with deterministic report writers.

Every writer is timestamp-free and formats floats with `repr`, so a
campaign re-run with the same seed produces byte-identical files.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import analysis, galerkin, geometry, spectrum
from .domain import make_domain, parse_zeta


# ---------------------------------------------------------------------------
# deterministic writers


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    os.replace(tmp, path)


def write_json(path, payload):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")
    os.replace(tmp, path)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, frozenset):
        return sorted(x)
    raise TypeError(f"not JSON-serialisable: {type(x)!r}")


def _basis(domain, zeta, ck, cn, cache=None):
    if cache is None:
        return spectrum.build_basis(domain, zeta, ck, cn)
    return spectrum.load_or_build(domain, zeta, ck, cn, directory=cache)


# ---------------------------------------------------------------------------
# spectrum campaign


@dataclass
class SpectrumReport:
    domain: str
    rows: list            # one dict per slip length
    passed: bool

    def to_payload(self):
        return {"domain": self.domain, "rows": self.rows,
                "passed": self.passed}


def spectrum_report(domain_name, zetas, cutoff_kappa=2, cutoff_n=4,
                    out=None, cache=None, sign_tol=1e-10):
    """Build and validate a basis per slip length and report the spectrum.

    For slip lengths where the wall curvature is dominated by 1/zeta the
    spectrum must be nonpositive (up to `sign_tol`); beyond that range no
    sign is asserted — the positive part lambda_hat is reported and
    checked for consistency with the quadrature energy form on the top
    mode.
    """
    domain = make_domain(domain_name)
    rows = []
    passed = True
    for key in zetas:
        zeta = parse_zeta(key)
        basis = _basis(domain, zeta, cutoff_kappa, cutoff_n, cache)
        rep = spectrum.validate_basis(basis)
        lam_max = rep["lambda_max"]
        # curvature bound: flat walls are always in range; the sphere needs
        # 1/zeta >= 1/R
        curv = 0.0 if domain.name == "channel" else 1.0 / domain.radius
        sign_guaranteed = zeta.inv >= curv - 1e-15
        sign_ok = (lam_max <= sign_tol) if sign_guaranteed else True
        hat_ok = rep["lambda_hat"] == max(0.0, lam_max)
        consistent = rep["dirichlet_defect"] <= 1e-8
        rows.append({
            "zeta": str(zeta), "n_modes": rep["n_modes"],
            "lambda_max": lam_max, "lambda_hat": rep["lambda_hat"],
            "eigen_residual": rep["eigen_residual"],
            "navier_trace": rep["navier_trace"],
            "normal_trace": rep["normal_trace"],
            "gram_defect": rep["gram_defect"],
            "divergence": rep["divergence"],
            "dirichlet_defect": rep["dirichlet_defect"],
            "sign_guaranteed": sign_guaranteed,
            "sign_ok": sign_ok, "consistent": bool(hat_ok and consistent),
        })
        passed = passed and sign_ok and hat_ok and consistent
    report = SpectrumReport(domain=domain_name, rows=rows, passed=passed)
    if out:
        header = list(rows[0].keys())
        write_csv(os.path.join(out, f"spectrum_{domain_name}.csv"), header,
                  [[r[h] for h in header] for r in rows])
        write_json(os.path.join(out, f"spectrum_{domain_name}.json"),
                   report.to_payload())
    return report


def shear_eigenvalue_curve(zetas=None, out=None):
    """First even flat-wall shear eigenvalue as the slip length varies.

    The eigenvalue rises continuously from the clamped value -pi^2 at
    vanishing slip to 0 at complete slip; the returned report records the
    curve, its monotonicity, and the distance of the small-slip end from
    -pi^2.
    """
    if zetas is None:
        zetas = ["inf"] + [f"1e{p}" for p in range(6, -7, -1)]
    rows = []
    for key in zetas:
        zeta = parse_zeta(key)
        k, parity = spectrum.shear_root(zeta, 0)
        rows.append({"zeta": str(zeta), "k": float(k),
                     "lam": -float(k) ** 2, "parity": parity})
    lams = [r["lam"] for r in rows]
    # zetas are ordered largest-to-smallest slip: the eigenvalue must fall
    monotone = all(lams[i] >= lams[i + 1] - 1e-14 for i in range(len(lams) - 1))
    smallest = min((r for r in rows if r["zeta"] != "inf"),
                   key=lambda r: float(r["zeta"]))
    clamped_gap = abs(smallest["lam"] + math.pi ** 2)
    payload = {"rows": rows, "monotone": monotone,
               "clamped_gap": clamped_gap}
    if out:
        write_csv(os.path.join(out, "shear_curve.csv"),
                  ["zeta", "k", "lam", "parity"],
                  [[r["zeta"], r["k"], r["lam"], r["parity"]] for r in rows])
        write_json(os.path.join(out, "shear_curve.json"), payload)
    return payload


# ---------------------------------------------------------------------------
# identity and inequality campaigns


def identity_campaign(domains=("channel", "ball"), count=100, seed=101,
                      out=None):
    reports = {}
    for dom in domains:
        rep = analysis.identity_suite(dom, count=count, seed=seed)
        reports[dom] = rep
        if out:
            with open(os.path.join(out, f"identities_{dom}.json"), "w") as fh:
                fh.write(rep.to_json() + "\n")
    return reports


def monitor_campaign(domains=("channel", "ball"), count=24, seed=7,
                     out=None):
    reports = {}
    for dom in domains:
        rep = analysis.monitor_suite(dom, count=count, seed=seed)
        reports[dom] = rep
        if out:
            with open(os.path.join(out, f"monitors_{dom}.json"), "w") as fh:
                fh.write(rep.to_json() + "\n")
    return reports


# ---------------------------------------------------------------------------
# wall-friction (vanishing slip) limit


@dataclass
class NoslipReport:
    mu: float
    t_final: float
    n_modes: int
    rows: list
    bounded: bool
    decreasing: bool

    @property
    def passed(self):
        return self.bounded and self.decreasing

    def to_payload(self):
        return dict(self.__dict__)


def noslip_limit(zetas=("0.1", "0.01", "0.001", "0.0001"), mu=0.1,
                 t_final=1.0, dt=2e-3, n_modes=50, cutoff_kappa=2,
                 cutoff_n=4, seed=2024, out=None, cache=None,
                 domain_name="channel"):
    """Wall friction against the slip-length bound.

    One fixed smooth reference velocity is projected onto the eigenbasis
    of each slip length; every run then accumulates the wall energy
    int_0^T int_Gamma |u|^2 through the integrator stages.  The bound
    checked is (zeta / 2 mu) ||u0||^2 per run, and the accumulated wall
    energy must fall as the slip length does.
    """
    domain = make_domain(domain_name)
    grid, _ = analysis.suite_grids(domain)
    bnd = geometry.make_boundary(grid)
    recipes = analysis.draw_recipes(domain_name, {}, 3, seed,
                                    kinds=["tangent"], with_scalar=False)
    u_ref = analysis.realize_sample(recipes[0], grid, bnd).u
    u_ref = u_ref / math.sqrt(grid.norm2(u_ref))
    rows = []
    for key in zetas:
        zeta = parse_zeta(key)
        basis = _basis(domain, zeta, cutoff_kappa, cutoff_n, cache)
        basis = basis.subset(min(n_modes, len(basis)))
        tensor = galerkin.build_convection(grid, basis)
        system = galerkin.GalerkinSystem(basis=basis, tensor=tensor, mu=mu)
        gram = galerkin.boundary_gram(grid, bnd, basis)
        c0 = basis.project(grid, u_ref)
        traj = galerkin.integrate_rk4(system, c0, t_final, dt,
                                      save_every=50, wall_gram=gram)
        u0n2 = float(c0 @ c0)
        flux = float(traj.wall_flux[-1])
        bound = zeta.value / (2.0 * mu) * u0n2
        rows.append({"zeta": str(zeta), "u0_norm2": u0n2,
                     "wall_energy": flux, "bound": bound,
                     "ratio": flux / bound if bound > 0 else math.inf,
                     "blown_up": traj.blown_up})
    bounded = all(r["wall_energy"] <= r["bound"] * 1.001 for r in rows)
    fluxes = [r["wall_energy"] for r in rows]
    decreasing = all(fluxes[i] > fluxes[i + 1]
                     for i in range(len(fluxes) - 1))
    report = NoslipReport(mu=mu, t_final=t_final, n_modes=n_modes,
                          rows=rows, bounded=bounded, decreasing=decreasing)
    if out:
        header = ["zeta", "u0_norm2", "wall_energy", "bound", "ratio",
                  "blown_up"]
        write_csv(os.path.join(out, "noslip_limit.csv"), header,
                  [[r[h] for h in header] for r in rows])
        write_json(os.path.join(out, "noslip_limit.json"),
                   report.to_payload())
    return report


# ---------------------------------------------------------------------------
# vanishing-viscosity limit


@dataclass
class InviscidReport:
    zeta: str
    t_final: float
    rows: list
    euler_drift: float
    fitted_alpha: float
    monotone: bool
    printed_exponent: float
    proof_exponent: float

    @property
    def passed(self):
        return self.monotone and self.fitted_alpha >= 0.45 \
            and self.euler_drift <= 1e-12

    def to_payload(self):
        return dict(self.__dict__)


def inviscid_limit(mus=(1e-1, 1e-2, 1e-3), t_final=1.0, dt=1e-3,
                   zeta_key="1.0", n_modes=50, cutoff_kappa=2, cutoff_n=4,
                   seed=2024, out=None, cache=None):
    """Distance to a steady Euler flow as viscosity vanishes.

    The reference is a combination of horizontal shear profiles: its
    self-advection vanishes identically, so it is a steady solution of
    the inviscid system, and the experiment *verifies* that by running
    the full nonlinear system at mu = 0 and measuring the drift.  Each
    viscous run then records sup_t ||u^mu(t) - u_euler||_2, the rate
    alpha is fitted from the error decay, and both reference exponents
    (the printed first-order rate and the square-root rate the energy
    argument yields) are recorded alongside rather than asserted.
    """
    domain = make_domain("channel")
    zeta = parse_zeta(zeta_key)
    grid, _ = analysis.suite_grids(domain)
    bnd = geometry.make_boundary(grid)
    basis = _basis(domain, zeta, cutoff_kappa, cutoff_n, cache)
    basis = basis.subset(min(n_modes, len(basis)))
    tensor = galerkin.build_convection(grid, basis)
    shear_idx = [i for i, m in enumerate(basis.modes)
                 if m.family == "shear"]
    if not shear_idx:
        raise ValueError("the retained modes contain no shear profiles")
    rng = np.random.default_rng(seed)
    c0 = np.zeros(len(basis))
    c0[shear_idx] = rng.standard_normal(len(shear_idx)) \
        / (1.0 + np.arange(len(shear_idx)))
    c0 = c0 / np.linalg.norm(c0)

    euler = galerkin.GalerkinSystem(basis=basis, tensor=tensor, mu=0.0)
    traj0 = galerkin.integrate_rk4(euler, c0, t_final, dt, save_every=50)
    drift = float(np.abs(traj0.coeffs - c0[None, :]).max())

    lam = basis.eigenvalues
    rows = []
    for mu in mus:
        system = galerkin.GalerkinSystem(basis=basis, tensor=tensor, mu=mu)
        traj = galerkin.integrate_rk4(system, c0, t_final, dt,
                                      save_every=20)
        err = float(np.sqrt(
            np.sum((traj.coeffs - c0[None, :]) ** 2, axis=1)).max())
        # closed-form check: with convection inert on shear combinations
        # the coefficients decay mode-by-mode
        tt = traj.times[:, None]
        diag = np.exp(mu * lam[None, :] * tt) * c0[None, :]
        err_diag = float(np.sqrt(np.sum((diag - c0[None, :]) ** 2,
                                        axis=1)).max())
        rows.append({"mu": mu, "sup_error": err,
                     "diagonal_error": err_diag,
                     "agreement": abs(err - err_diag) / max(err_diag, 1e-30)})
    errs = [r["sup_error"] for r in rows]
    monotone = all(errs[i] > errs[i + 1] for i in range(len(errs) - 1))
    logs = np.log(np.array([r["mu"] for r in rows]))
    loge = np.log(np.array(errs))
    alpha = float(np.polyfit(logs, loge, 1)[0])
    report = InviscidReport(zeta=str(zeta), t_final=t_final, rows=rows,
                            euler_drift=drift, fitted_alpha=alpha,
                            monotone=monotone, printed_exponent=1.0,
                            proof_exponent=0.5)
    if out:
        header = ["mu", "sup_error", "diagonal_error", "agreement"]
        write_csv(os.path.join(out, "inviscid_limit.csv"), header,
                  [[r[h] for h in header] for r in rows])
        write_json(os.path.join(out, "inviscid_limit.json"),
                   report.to_payload())
    return report


# ---------------------------------------------------------------------------
# single-run driver (CLI `run`)


def run_simulation(domain_name, zeta_key, mu, t_final, dt, n_modes=50,
                   cutoff_kappa=2, cutoff_n=4, seed=0, out=None,
                   cache=None, stepper="rk4"):
    """Integrate one seeded initial condition and write the trajectory.

    Returns (trajectory, energy report).  The CSV holds the saved
    coefficient rows; the JSON holds the energy balance.
    """
    domain = make_domain(domain_name)
    zeta = parse_zeta(zeta_key)
    grid, _ = analysis.suite_grids(domain)
    bnd = geometry.make_boundary(grid)
    basis = _basis(domain, zeta, cutoff_kappa, cutoff_n, cache)
    basis = basis.subset(min(n_modes, len(basis)))
    tensor = galerkin.build_convection(grid, basis)
    system = galerkin.GalerkinSystem(basis=basis, tensor=tensor, mu=mu)
    gram = galerkin.boundary_gram(grid, bnd, basis)
    rng = np.random.default_rng(seed)
    c0 = rng.standard_normal(len(basis)) / (1.0 + np.arange(len(basis)))
    c0 = c0 / np.linalg.norm(c0)
    step = {"rk4": galerkin.integrate_rk4,
            "factored": galerkin.integrate_factored}[stepper]
    traj = step(system, c0, t_final, dt, save_every=max(1, int(0.02 / dt)),
                wall_gram=gram)
    energy = galerkin.energy_report(system, traj, grid, bnd, zeta)
    if out:
        rows = [[traj.times[i], traj.wall_flux[i], traj.dissipation[i]]
                + traj.coeffs[i].tolist() for i in range(len(traj.times))]
        header = ["t", "wall_flux", "dissipation"] \
            + [f"c{k}" for k in range(traj.coeffs.shape[1])]
        write_csv(os.path.join(out, "trajectory.csv"), header, rows)
        write_json(os.path.join(out, "energy.json"), {
            "mu": mu, "zeta": str(zeta), "dt": dt,
            "blown_up": traj.blown_up,
            "max_residual_spectral": energy.max_residual_spectral,
            "max_residual_centered": energy.max_residual_centered,
            "integrated_residual": energy.integrated_residual,
            "relative_spectral": energy.relative_spectral(),
            "scale": energy.scale,
            "rows": [r.__dict__ for r in energy.rows],
        })
    return traj, energy
