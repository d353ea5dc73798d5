"""Identity residuals on closed-form fields, monitors, and suite reports."""

import json
import math

import numpy as np
import pytest

from slipstokes import analysis, fields, helmholtz
from slipstokes.domain import SlipLength


def _rigid_rotation(grid, omega):
    xyz = grid.rr[None, :, None, None] * grid.rhat[:, None]
    return np.cross(np.asarray(omega)[:, None, None, None], xyz, axis=0)


def _constant_sample(grid, bnd, vec=(0.6, -1.1, 0.0)):
    u = np.zeros((3, grid.nx, grid.ny, grid.nz))
    for c in range(3):
        u[c] = vec[c]
    return analysis.FieldSample(
        grid=grid, bnd=bnd, u=u, psi=np.zeros_like(u),
        zeta=SlipLength.infinite(), divergence_free=True,
        tangent_on_boundary=True, satisfies_navier=True,
        label="constant")


class TestClosedFormResiduals:
    def test_constant_channel_field_zeroes_every_identity(self, channel_grid,
                                                          channel_bnd):
        sample = _constant_sample(channel_grid, channel_bnd)
        res = analysis.check_pointwise_identities(sample)
        res.update(analysis.check_integral_identities(sample))
        assert "_resolution_insufficient" not in res
        gated = {k: v for k, v in res.items() if not k.startswith("_")}
        # a constant field has no scalar attached, so the f-identities skip
        assert "bernoulli_pointwise" in gated
        assert "stokes_curl_trace" in gated
        for name, val in gated.items():
            assert val < 1e-11, f"{name} residual {val}"

    def test_rigid_rotation_ball_closed_forms(self, ball_grid, ball_bnd):
        omega = 0.7
        u = _rigid_rotation(ball_grid, (0.0, 0.0, omega))
        vol = ball_grid.domain.volume
        jac = fields.jacobian(ball_grid, u)
        # the velocity gradient of a rotation is a constant antisymmetric
        # matrix: |grad u|^2 = 2 |Omega|^2 |B|, |curl u|^2 = 4 |Omega|^2 |B|
        assert abs(ball_grid.norm2(jac) - 2 * omega**2 * vol) < 1e-10
        cu = fields.curl(ball_grid, u, jac=jac)
        assert abs(ball_grid.norm2(cu) - 4 * omega**2 * vol) < 1e-10
        # the sphere's shape form integrates |u_t|^2 / R over the boundary
        utr = ball_bnd.tangential(ball_bnd.trace(u))
        shape = ball_bnd.surface_integrate(ball_bnd.pi_form(utr, utr))
        assert abs(shape - 2 * omega**2 * vol) < 1e-10

    def test_rigid_rotation_ball_identities(self, ball_grid, ball_bnd):
        u = _rigid_rotation(ball_grid, (0.2, -0.4, 0.9))
        sample = analysis.FieldSample(
            grid=ball_grid, bnd=ball_bnd, u=u, psi=np.zeros_like(u),
            zeta=SlipLength.infinite(), divergence_free=True,
            tangent_on_boundary=True, satisfies_navier=True,
            label="rotation")
        res = analysis.check_pointwise_identities(sample)
        res.update(analysis.check_integral_identities(sample))
        for name, val in res.items():
            if name.startswith("_"):
                continue
            assert val < 1e-10, f"{name} residual {val}"

    def test_bochner_closed_form(self, channel_grid, channel_bnd):
        # f = sin(x): |hess f|^2 = sin^2 x, and the identity's right side
        # reduces to -cos 2x + cos^2 x = sin^2 x
        f = np.broadcast_to(np.sin(channel_grid.x)[:, None, None],
                            (channel_grid.nx, channel_grid.ny,
                             channel_grid.nz)).copy()
        hess = fields.hessian(channel_grid, f)
        hess2 = np.einsum("cd...,cd...->...", hess, hess)
        assert np.abs(hess2 - np.sin(channel_grid.x)[:, None, None] ** 2).max() < 1e-10
        sample = _constant_sample(channel_grid, channel_bnd)
        sample = analysis.FieldSample(
            grid=channel_grid, bnd=channel_bnd, u=sample.u, f=f,
            zeta=SlipLength.infinite(), divergence_free=True,
            tangent_on_boundary=True, label="constant+sin")
        res = analysis.check_pointwise_identities(sample)
        assert res["bochner_pointwise"] < 1e-10
        integral = analysis.check_integral_identities(sample)
        assert integral["gradsq_normal"] < 1e-10
        assert integral["hessian_parts"] < 1e-10

    def test_flux_expansion_needs_coefficient_two(self, channel_grid,
                                                  channel_bnd):
        # with a scalar whose wall flux term is active, the coefficient-1
        # variant must NOT balance while the gated coefficient-2 form does
        z = channel_grid.z[None, None, :]
        f = np.broadcast_to(
            np.cos(channel_grid.x)[:, None, None] * (z**3 - 0.2 * z),
            (channel_grid.nx, channel_grid.ny, channel_grid.nz)).copy()
        sample = analysis.FieldSample(
            grid=channel_grid, bnd=channel_bnd,
            u=_constant_sample(channel_grid, channel_bnd).u, f=f,
            zeta=SlipLength.infinite(), divergence_free=True,
            tangent_on_boundary=True, label="fluxy")
        res = analysis.check_integral_identities(sample)
        assert res["gradsq_normal"] < 1e-9
        assert res["_gradsq_normal_printed"] > 1e-3


class TestSampleVerification:
    def test_false_flag_is_rejected(self, channel_grid, channel_bnd):
        u = np.zeros((3, channel_grid.nx, channel_grid.ny, channel_grid.nz))
        u[2] = 1.0  # constant vertical flow crosses the walls
        with pytest.raises(ValueError, match="normal trace"):
            analysis.FieldSample(grid=channel_grid, bnd=channel_bnd, u=u,
                                 tangent_on_boundary=True, label="bad")

    def test_wrong_closed_form_laplacian_is_rejected(self, channel_grid,
                                                     channel_bnd):
        sample = _constant_sample(channel_grid, channel_bnd)
        with pytest.raises(ValueError, match="Laplacian"):
            analysis.FieldSample(grid=channel_grid, bnd=channel_bnd,
                                 u=sample.u, psi=sample.u + 1.0,
                                 label="bad-psi")

    def test_navier_flag_needs_slip_length(self, channel_grid, channel_bnd):
        sample = _constant_sample(channel_grid, channel_bnd)
        with pytest.raises(ValueError, match="slip length"):
            analysis.FieldSample(grid=channel_grid, bnd=channel_bnd,
                                 u=sample.u, satisfies_navier=True,
                                 label="no-zeta")

    def test_under_resolved_sample_is_flagged(self, channel):
        from slipstokes.channel import ChannelGrid
        from slipstokes import geometry
        coarse = ChannelGrid(channel, 6, 6, 16)
        bnd = geometry.make_boundary(coarse)
        u = np.zeros((3, coarse.nx, coarse.ny, coarse.nz))
        u[0] = np.cos(24.0 * coarse.z)[None, None, :]
        sample = analysis.FieldSample(grid=coarse, bnd=bnd, u=u,
                                      label="ringing", verify=False)
        res = analysis.check_integral_identities(sample)
        assert res.get("_resolution_insufficient") == 1.0


class TestMonitors:
    def test_eigen_samples_fit_finite_constants(self, channel_grid,
                                                channel_bnd, channel_basis):
        bases = {"1.0": channel_basis}
        recipes = analysis.draw_recipes("channel", bases, 6, seed=42,
                                        kinds=["eigen"], with_scalar=False)
        samples = [analysis.realize_sample(r, channel_grid, channel_bnd,
                                           bases=bases) for r in recipes]
        for name in ("h2_by_double_curl", "hessian_control", "stokes_h1"):
            rep = analysis.fit_inequality_constants(name, samples)
            assert rep.samples == 6
            assert rep.rejected == []
            assert math.isfinite(rep.fitted_constant)
            assert rep.fitted_constant > 0.0

    def test_missing_flags_are_listed_not_skipped(self, channel_grid,
                                                  channel_bnd):
        recipes = analysis.draw_recipes("channel", {}, 2, seed=5,
                                        kinds=["general"], with_scalar=False)
        samples = [analysis.realize_sample(r, channel_grid, channel_bnd)
                   for r in recipes]
        rep = analysis.fit_inequality_constants("h1_by_curl_div", samples)
        assert rep.samples == 0
        assert math.isnan(rep.fitted_constant)
        assert len(rep.rejected) == 2
        assert all("missing tangent" in reason for _, reason in rep.rejected)

    def test_degenerate_sample_is_listed(self, channel_grid, channel_bnd):
        zero = analysis.FieldSample(
            grid=channel_grid, bnd=channel_bnd,
            u=np.zeros((3, channel_grid.nx, channel_grid.ny,
                        channel_grid.nz)),
            divergence_free=True, tangent_on_boundary=True, label="null")
        rep = analysis.fit_inequality_constants("h1_by_curl_div", [zero])
        assert rep.samples == 0
        assert rep.rejected == [["null", "degenerate (vanishing right side)"]]

    def test_basis_monitor_requires_basis(self):
        with pytest.raises(ValueError, match="eigenbasis"):
            analysis.fit_inequality_constants("projected_curl_energy", [])

    def test_report_json_is_deterministic(self, channel_grid, channel_bnd,
                                          channel_basis):
        bases = {"1.0": channel_basis}
        recipes = analysis.draw_recipes("channel", bases, 3, seed=9,
                                        kinds=["eigen"], with_scalar=False)
        samples = [analysis.realize_sample(r, channel_grid, channel_bnd,
                                           bases=bases) for r in recipes]
        a = analysis.fit_inequality_constants("h1_by_curl_div", samples)
        b = analysis.fit_inequality_constants("h1_by_curl_div", samples)
        assert a.to_json() == b.to_json()
        parsed = json.loads(a.to_json())
        assert parsed["inequality_id"] == "h1_by_curl_div"
        assert parsed["samples"] == 3


class TestProjectionEnergy:
    def test_profile_exactly_nondecreasing_and_matches_quadrature(
            self, channel_grid, channel_bnd, channel_basis):
        rng = np.random.default_rng(3)
        c = rng.standard_normal(len(channel_basis))
        u = channel_basis.reconstruct(channel_grid, c)
        profile, quad = analysis.projection_energy_profile(
            channel_grid, channel_bnd, channel_basis, u)
        assert profile.shape == (len(channel_basis),)
        assert np.all(np.diff(profile) >= 0.0)
        assert abs(profile[-1] - quad) < 1e-8 * max(1.0, abs(quad))

    def test_profile_of_subspace_field_saturates(self, channel_grid,
                                                 channel_bnd, channel_basis):
        # energy of a field spanned by the first five modes stops growing
        # once those five are in
        c = np.zeros(len(channel_basis))
        c[:5] = [1.0, -0.5, 0.25, 2.0, 1.5]
        u = channel_basis.reconstruct(channel_grid, c)
        profile, _ = analysis.projection_energy_profile(
            channel_grid, channel_bnd, channel_basis, u)
        assert abs(profile[-1] - profile[4]) < 1e-9 * max(1.0, profile[-1])


class TestSuiteQuick:
    def test_identity_suite_small_run_passes(self):
        rep = analysis.identity_suite("channel", count=6, seed=11)
        assert rep.passed is True
        assert max(rep.worst.values()) <= 1e-9
        # every gated identity was exercised at least once
        assert set(rep.worst) == set(analysis.GATED_IDENTITIES)
        parsed = json.loads(rep.to_json())
        assert parsed["domain"] == "channel"
        assert parsed["count"] == 6
