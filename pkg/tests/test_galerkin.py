"""Convection tensor structure, coefficient dynamics, energy accounting."""

import math

import numpy as np
import pytest

from slipstokes import fields, galerkin, helmholtz
from slipstokes.domain import SlipLength

ZETA = SlipLength(1.0)


def _shear_index(basis):
    return next(i for i, m in enumerate(basis.modes) if m.family == "shear")


class TestConvectionTensor:
    def test_skew_symmetry_in_outer_pair(self, channel_tensor):
        assert channel_tensor.skew_defect() <= 1e-10
        b = channel_tensor.values
        rng = np.random.default_rng(0)
        n = len(channel_tensor)
        for _ in range(20):
            k, i, j = rng.integers(0, n, size=3)
            assert abs(b[k, i, j] + b[j, i, k]) <= 1e-12

    def test_energy_contraction_on_random_coefficients(self, channel_tensor):
        rng = np.random.default_rng(1)
        n = len(channel_tensor)
        for _ in range(1000):
            c = rng.standard_normal(n)
            norm = float(np.linalg.norm(c))
            assert abs(channel_tensor.energy_defect(c)) <= 1e-10 * norm**3

    def test_entries_match_direct_quadrature(self, channel_grid,
                                             channel_basis, channel_tensor):
        v = channel_basis.velocities(channel_grid)
        rng = np.random.default_rng(2)
        n = len(channel_tensor)
        for _ in range(5):
            k, i, j = rng.integers(0, n, size=3)
            direct = channel_grid.integrate(fields.dot(
                v[k], fields.advect(channel_grid, v[i], v[j])))
            assert abs(channel_tensor.values[k, i, j] - direct) <= 1e-10

    def test_subset_is_leading_block(self, channel_tensor):
        sub = channel_tensor.subset(9)
        assert len(sub) == 9
        assert np.array_equal(sub.values, channel_tensor.values[:9, :9, :9])
        assert sub.labels == channel_tensor.labels[:9]

    def test_pure_shear_mode_does_not_self_advect(self, channel_basis,
                                                  channel_tensor):
        i = _shear_index(channel_basis)
        assert np.abs(channel_tensor.values[:, i, i]).max() == 0.0


class TestBoundaryGram:
    def test_matches_surface_quadrature(self, channel_grid, channel_bnd,
                                        channel_basis):
        g = galerkin.boundary_gram(channel_grid, channel_bnd, channel_basis)
        assert np.abs(g - g.T).max() == 0.0
        rng = np.random.default_rng(4)
        c = rng.standard_normal(len(channel_basis))
        u = channel_basis.reconstruct(channel_grid, c)
        tr = channel_bnd.trace(u)
        direct = channel_bnd.surface_integrate(fields.dot(tr, tr))
        assert abs(float(c @ g @ c) - direct) <= 1e-10 * max(1.0, direct)
        # the wall energy is a nonnegative quadratic form
        eigs = np.linalg.eigvalsh(g)
        assert eigs.min() >= -1e-12


class TestDynamics:
    def test_single_mode_decays_exponentially_without_leak(
            self, channel_system):
        basis = channel_system.basis
        i = _shear_index(basis)
        lam = basis.eigenvalues[i]
        c0 = np.zeros(len(basis))
        c0[i] = 0.8
        traj = galerkin.integrate_rk4(channel_system, c0, t_final=5.0,
                                      dt=1e-3, save_every=100)
        exact = 0.8 * math.exp(channel_system.mu * lam * 5.0)
        got = traj.coeffs[-1, i]
        assert abs(got - exact) <= 1e-12 * abs(exact)
        leak = np.abs(np.delete(traj.coeffs, i, axis=1)).max()
        assert leak == 0.0
        assert not traj.blown_up

    def test_zero_viscosity_conserves_energy(self, channel_basis,
                                             channel_tensor):
        system = galerkin.GalerkinSystem(basis=channel_basis,
                                         tensor=channel_tensor, mu=0.0)
        rng = np.random.default_rng(6)
        c0 = rng.standard_normal(len(channel_basis))
        c0 /= np.linalg.norm(c0)
        traj = galerkin.integrate_rk4(system, c0, t_final=1.0, dt=1e-3,
                                      save_every=50)
        drift = np.abs(traj.norm2() - traj.norm2()[0]).max()
        assert drift <= 1e-10

    def test_steppers_converge_to_adaptive_reference(self, channel_system):
        rng = np.random.default_rng(7)
        c0 = 0.5 * rng.standard_normal(len(channel_system.basis))
        ref = galerkin.integrate_adaptive(channel_system, c0, t_final=0.5,
                                          rtol=1e-12, atol=1e-14)

        def err(stepper, dt):
            traj = stepper(channel_system, c0, t_final=0.5, dt=dt,
                           save_every=10**9)
            return np.abs(traj.coeffs[-1] - ref).max()

        for stepper in (galerkin.integrate_rk4, galerkin.integrate_factored):
            coarse, fine = err(stepper, 8e-3), err(stepper, 4e-3)
            # classical fourth order: halving the step cuts the endpoint
            # error by about sixteen (steps chosen so truncation stays
            # well above the roundoff floor)
            assert 8.0 < coarse / fine < 32.0, stepper.__name__
            assert fine < 1e-10
        # treating the stiff linear part exactly must not lose accuracy
        assert err(galerkin.integrate_factored, 8e-3) < err(
            galerkin.integrate_rk4, 8e-3)

    def test_factored_reduces_to_rk4_at_zero_viscosity(self, channel_basis,
                                                       channel_tensor):
        system = galerkin.GalerkinSystem(basis=channel_basis,
                                         tensor=channel_tensor, mu=0.0)
        rng = np.random.default_rng(8)
        c0 = 0.3 * rng.standard_normal(len(channel_basis))
        kw = dict(t_final=0.2, dt=2e-3, save_every=10)
        a = galerkin.integrate_rk4(system, c0, **kw)
        b = galerkin.integrate_factored(system, c0, **kw)
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_accumulators_carry_integrator_order(self, channel_system,
                                                 channel_grid, channel_bnd):
        wall_gram = galerkin.boundary_gram(channel_grid, channel_bnd,
                                           channel_system.basis)
        rng = np.random.default_rng(9)
        c0 = 0.5 * rng.standard_normal(len(channel_system.basis))
        coarse = galerkin.integrate_rk4(channel_system, c0, t_final=0.5,
                                        dt=2e-3, save_every=250,
                                        wall_gram=wall_gram)
        fine = galerkin.integrate_rk4(channel_system, c0, t_final=0.5,
                                      dt=1e-3, save_every=500,
                                      wall_gram=wall_gram)
        for series in ("wall_flux", "dissipation"):
            a = getattr(coarse, series)[-1]
            b = getattr(fine, series)[-1]
            assert abs(a - b) <= 1e-9 * max(1.0, abs(b)), series

    def test_blow_up_guard_flags_and_stops(self, channel_system):
        unstable = galerkin.GalerkinSystem(
            basis=channel_system.basis, tensor=channel_system.tensor,
            mu=-channel_system.mu * 40.0)
        c0 = np.zeros(len(unstable.basis))
        c0[-1] = 1.0  # fastest mode grows quickest under negated viscosity
        traj = galerkin.integrate_rk4(unstable, c0, t_final=10.0, dt=1e-2,
                                      guard=100.0)
        assert traj.blown_up
        assert traj.times[-1] < 10.0
        assert np.isfinite(traj.coeffs).all()

    def test_rejects_nonpositive_steps(self, channel_system):
        c0 = np.zeros(len(channel_system.basis))
        with pytest.raises(ValueError):
            galerkin.integrate_rk4(channel_system, c0, t_final=1.0, dt=0.0)
        with pytest.raises(ValueError):
            galerkin.integrate_rk4(channel_system, c0, t_final=-1.0, dt=0.1)
        with pytest.raises(ValueError):
            galerkin.integrate_factored(channel_system, c0, t_final=1.0,
                                        dt=-0.5)

    def test_mismatched_tensor_rejected(self, channel_basis, channel_tensor):
        with pytest.raises(ValueError, match="sizes differ"):
            galerkin.GalerkinSystem(basis=channel_basis.subset(5),
                                    tensor=channel_tensor, mu=0.1)

    def test_subset_truncates_consistently(self, channel_system):
        sub = channel_system.subset(12)
        assert len(sub.basis) == 12
        assert np.array_equal(sub.lam, channel_system.lam[:12])
        assert np.array_equal(sub.tensor.values,
                              channel_system.tensor.values[:12, :12, :12])


@pytest.fixture(scope="module")
def trajectory(channel_system, channel_grid, channel_bnd):
    wall_gram = galerkin.boundary_gram(channel_grid, channel_bnd,
                                       channel_system.basis)
    rng = np.random.default_rng(10)
    c0 = 0.5 * rng.standard_normal(len(channel_system.basis))
    return galerkin.integrate_rk4(channel_system, c0, t_final=0.5,
                                  dt=1e-3, save_every=25,
                                  wall_gram=wall_gram)


class TestEnergyAccounting:
    def test_spectral_energy_balance(self, channel_system, channel_grid,
                                     channel_bnd, trajectory):
        rep = galerkin.energy_report(channel_system, trajectory,
                                     channel_grid, channel_bnd, ZETA)
        assert rep.relative_spectral() <= 1e-10
        assert abs(rep.integrated_residual) <= 1e-10 * max(
            1.0, trajectory.norm2()[0])
        # the centered-difference route carries the save-spacing error;
        # it is reported, bounded, and necessarily coarser
        assert math.isfinite(rep.relative_centered())
        assert rep.relative_centered() < 1.0

    def test_weak_form_residual(self, channel_system, channel_grid,
                                channel_bnd, trajectory):
        mid = len(trajectory.times) // 2
        res = galerkin.weak_form_residual(channel_system, trajectory,
                                          channel_grid, channel_bnd, ZETA,
                                          mid)
        assert res <= 1e-9

    def test_strong_monitor_envelope(self, channel_system, channel_grid,
                                     trajectory):
        rep = galerkin.strong_monitor(channel_system, trajectory,
                                      channel_grid, max_samples=20)
        assert rep.m1 >= 0.0 and rep.m2 >= 0.0
        assert np.all(rep.values > 0.0)
        assert rep.margin >= -1e-7 * max(rep.values.max(), 1.0)
        horizon = galerkin.riccati_majorant(rep.values[0], rep.m1, rep.m2)
        assert horizon > 0.0


class TestRiccatiMajorant:
    def test_closed_forms(self):
        assert galerkin.riccati_majorant(1.0, 0.0, 2.0) == 0.5
        assert galerkin.riccati_majorant(0.0, 1.0, 1.0) == math.inf
        assert galerkin.riccati_majorant(1.0, 1.0, 0.0) == math.inf
        got = galerkin.riccati_majorant(2.0, 3.0, 4.0)
        assert abs(got - math.log1p(3.0 / 8.0) / 3.0) < 1e-15

    def test_horizon_shrinks_with_initial_size(self):
        ts = [galerkin.riccati_majorant(r, 1.0, 1.0)
              for r in (0.1, 1.0, 10.0)]
        assert ts[0] > ts[1] > ts[2] > 0.0

    def test_rejects_negative_parameters(self):
        for bad in ((-1.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, -1.0)):
            with pytest.raises(ValueError):
                galerkin.riccati_majorant(*bad)
