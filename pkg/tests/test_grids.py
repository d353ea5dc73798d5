import math

import numpy as np
import pytest

from slipstokes import fields
from slipstokes.ball import BallGrid
from slipstokes.channel import ChannelGrid


@pytest.fixture(scope="module")
def cgrid(channel):
    return ChannelGrid(channel, 12, 12, 24)


@pytest.fixture(scope="module")
def bgrid(ball):
    return BallGrid(ball, 24, 10)


# -- channel ------------------------------------------------------------------


def test_channel_derivatives_exact_on_trig_times_poly(cgrid):
    x, y = np.meshgrid(cgrid.x, cgrid.y, indexing="ij")
    f = np.cos(2.0 * x + y)[:, :, None] * (cgrid.z ** 3 - cgrid.z)
    fx = -2.0 * np.sin(2.0 * x + y)[:, :, None] * (cgrid.z ** 3 - cgrid.z)
    fz = np.cos(2.0 * x + y)[:, :, None] * (3.0 * cgrid.z ** 2 - 1.0)
    assert np.abs(cgrid.dx(f) - fx).max() < 1e-11
    assert np.abs(cgrid.dz(f) - fz).max() < 1e-11
    lap = (-5.0 * (cgrid.z ** 3 - cgrid.z) + 6.0 * cgrid.z) \
        * np.cos(2.0 * x + y)[:, :, None]
    assert np.abs(cgrid.laplacian(f) - lap).max() < 1e-10


def test_channel_integrate_exact(cgrid):
    # int_0^1 z^4 dz * Lx * Ly, constant in x and y
    f = np.broadcast_to(cgrid.z ** 4, (cgrid.nx, cgrid.ny, cgrid.nz))
    vol = cgrid.domain.lx * cgrid.domain.ly
    assert cgrid.integrate(f) == pytest.approx(vol / 5.0, rel=1e-13)


def test_channel_quad_weights_match_integrate(cgrid):
    rng = np.random.default_rng(3)
    f = rng.standard_normal((cgrid.nx, cgrid.ny, cgrid.nz))
    assert float(np.sum(f * cgrid.quad_weights)) \
        == pytest.approx(cgrid.integrate(f), rel=1e-13, abs=1e-13)


def test_channel_tail_fraction_flags_rough_fields(cgrid):
    smooth = np.broadcast_to(np.sin(math.pi * cgrid.z),
                             (cgrid.nx, cgrid.ny, cgrid.nz))
    rough = np.cos(np.outer(np.ones(cgrid.nx * cgrid.ny),
                            40.0 * cgrid.z)).reshape(smooth.shape)
    assert np.max(cgrid.tail_fraction(smooth)) < 1e-12
    assert np.max(cgrid.tail_fraction(rough)) > 1e-3


# -- ball ---------------------------------------------------------------------


def _xyz(grid):
    return grid.rr[None, :, None, None] * grid.rhat[:, None]


def test_ball_gradient_exact_on_polynomials(bgrid):
    x, y, z = _xyz(bgrid)
    f = x * x * y - 2.0 * y * z + z ** 3
    gx, gy, gz = 2.0 * x * y, x * x - 2.0 * z, -2.0 * y + 3.0 * z * z
    got = bgrid.gradient(f)
    assert np.abs(got[0] - gx).max() < 1e-11
    assert np.abs(got[1] - gy).max() < 1e-11
    assert np.abs(got[2] - gz).max() < 1e-11


def test_ball_laplacian_exact_on_polynomials(bgrid):
    x, y, z = _xyz(bgrid)
    f = 4.0 * x * x * y * y + x ** 4 + z ** 3
    lap = 8.0 * y * y + 20.0 * x * x + 6.0 * z
    assert np.abs(bgrid.laplacian(f) - lap).max() < 5e-11


def test_ball_integrate_exact(bgrid):
    x, y, z = _xyz(bgrid)
    # int over the unit ball of z^2 = 4 pi / 15
    assert bgrid.integrate(z * z) == pytest.approx(4.0 * math.pi / 15.0,
                                                   rel=1e-12)


def test_ball_quad_weights_match_integrate(bgrid):
    rng = np.random.default_rng(4)
    f = rng.standard_normal((bgrid.nr, bgrid.ntheta, bgrid.nphi))
    assert float(np.sum(f * bgrid.quad_weights)) \
        == pytest.approx(bgrid.integrate(f), rel=1e-13, abs=1e-13)


def test_ball_trace_and_surface_integral(bgrid):
    x, y, z = _xyz(bgrid)
    # on the unit sphere, int z^2 dS = 4 pi / 3
    tr = bgrid.trace(z * z)
    assert bgrid.surface_integrate(tr) == pytest.approx(4.0 * math.pi / 3.0,
                                                        rel=1e-12)
    # radial derivative of r^2 at the surface is 2R
    assert np.abs(bgrid.trace_dr(x * x + y * y + z * z) - 2.0).max() < 1e-10


def test_ball_divergence_of_gradient_matches_laplacian(bgrid):
    x, y, z = _xyz(bgrid)
    f = x * y * z + 0.3 * (x * x - z * z) * y
    lap_direct = bgrid.laplacian(f)
    lap_composed = fields.divergence(bgrid, bgrid.gradient(f))
    assert np.abs(lap_direct - lap_composed).max() < 2e-10
