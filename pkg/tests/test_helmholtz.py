import numpy as np
import pytest

from slipstokes import analysis, fields, helmholtz
from slipstokes.domain import SlipLength


def _tangent_sample(domain_name, grid, bnd, seed):
    recipes = analysis.draw_recipes(domain_name, {}, 1, seed,
                                    kinds=["tangent"], with_scalar=False)
    return analysis.realize_sample(recipes[0], grid, bnd)


def _general_sample(domain_name, grid, bnd, seed):
    recipes = analysis.draw_recipes(domain_name, {}, 1, seed,
                                    kinds=["general"], with_scalar=False)
    return analysis.realize_sample(recipes[0], grid, bnd)


@pytest.mark.parametrize("domain_name", ["channel", "ball"])
def test_helmholtz_decomposition_properties(domain_name, request):
    grid = request.getfixturevalue(f"{domain_name}_grid")
    bnd = request.getfixturevalue(f"{domain_name}_bnd")
    u = _general_sample(domain_name, grid, bnd, seed=21).u
    w, q = helmholtz.helmholtz_decompose(grid, bnd, u)
    grad_q = grid.gradient(q)
    # reconstruction
    assert np.abs(u - w - grad_q).max() < 1e-9
    # the solenoidal part is divergence-free and tangent
    assert np.abs(fields.divergence(grid, w)).max() < 1e-9
    assert np.abs(bnd.normal_trace(bnd.trace(w))).max() < 1e-9
    # orthogonality of the two parts
    inner = grid.integrate(fields.dot(w, grad_q))
    norm = grid.norm2(u)
    assert abs(inner) < 1e-10 * max(norm, 1.0)


@pytest.mark.parametrize("domain_name", ["channel", "ball"])
def test_leray_projection_idempotent(domain_name, request):
    grid = request.getfixturevalue(f"{domain_name}_grid")
    bnd = request.getfixturevalue(f"{domain_name}_bnd")
    u = _general_sample(domain_name, grid, bnd, seed=22).u
    pu = helmholtz.leray_project(grid, bnd, u)
    ppu = helmholtz.leray_project(grid, bnd, pu)
    scale = float(np.abs(pu).max())
    assert np.abs(ppu - pu).max() < 1e-9 * max(scale, 1.0)


@pytest.mark.parametrize("domain_name,zeta", [
    ("channel", SlipLength(1.0)),
    ("channel", SlipLength.infinite()),
    ("ball", SlipLength(0.5)),
])
def test_energy_form_dominates_gradient(domain_name, zeta, request):
    """E(u, u) >= ||grad u||^2 whenever the wall friction dominates the
    curvature (always on flat walls; zeta <= R on the sphere)."""
    grid = request.getfixturevalue(f"{domain_name}_grid")
    bnd = request.getfixturevalue(f"{domain_name}_bnd")
    for seed in (31, 32, 33):
        u = _tangent_sample(domain_name, grid, bnd, seed).u
        jac = fields.jacobian(grid, u)
        grad2 = grid.integrate(np.einsum("cd...,cd...->...", jac, jac))
        e_val = helmholtz.dirichlet_form(grid, bnd, zeta, u, u, jac=jac)
        assert e_val >= grad2 - 1e-10 * max(grad2, 1.0)


def test_energy_form_spectral_vs_quadrature(channel_grid, channel_bnd,
                                            channel_basis):
    """On eigenmodes the quadrature energy reproduces -lambda, and a
    random combination reproduces -sum lambda c^2."""
    rng = np.random.default_rng(41)
    c = rng.standard_normal(len(channel_basis)) \
        / (1.0 + np.arange(len(channel_basis)))
    u = channel_basis.reconstruct(channel_grid, c)
    zeta = channel_basis.zeta
    e_quad = helmholtz.dirichlet_form(channel_grid, channel_bnd, zeta, u, u)
    e_spec = -float(channel_basis.eigenvalues @ (c * c))
    assert e_quad == pytest.approx(e_spec, rel=1e-9)


def test_pressure_solve_matches_navier_data(channel_grid, channel_bnd):
    """The Neumann companion pressure reproduces its boundary data."""
    zeta = SlipLength(1.0)
    s = _tangent_sample("channel", channel_grid, channel_bnd, seed=51)
    p = helmholtz.solve_pressure_neumann(channel_grid, channel_bnd, zeta,
                                         s.u)
    data = helmholtz.navier_pressure_data(channel_bnd, zeta, s.u)
    got = channel_bnd.normal_derivative(p)
    assert np.abs(got - data).max() < 1e-8 * max(1.0,
                                                 float(np.abs(data).max()))


def test_stokes_apply_accepts_closed_form_laplacian(channel_grid,
                                                    channel_bnd,
                                                    channel_basis):
    rng = np.random.default_rng(61)
    c = rng.standard_normal(len(channel_basis)) \
        / (1.0 + np.arange(len(channel_basis))) ** 2
    u = channel_basis.reconstruct(channel_grid, c)
    lap = channel_basis.laplacian_image(channel_grid, c)
    zeta = channel_basis.zeta
    su_num, _ = helmholtz.stokes_apply(channel_grid, channel_bnd, zeta, u)
    su_cf, _ = helmholtz.stokes_apply(channel_grid, channel_bnd, zeta, u,
                                      lap=lap)
    scale = max(1.0, float(np.abs(su_cf).max()))
    assert np.abs(su_num - su_cf).max() < 1e-6 * scale
    # the closed-form route reproduces the eigenrelation S(u) = sum lam c a
    su_exact = channel_basis.reconstruct(channel_grid,
                                         c * channel_basis.eigenvalues)
    assert np.abs(su_cf - su_exact).max() < 1e-8 * scale
