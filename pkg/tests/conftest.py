import os

import pytest

from slipstokes import analysis, galerkin, geometry, spectrum
from slipstokes.domain import SlipLength, make_domain


@pytest.fixture(scope="session", autouse=True)
def basis_cache(tmp_path_factory):
    """Point the on-disk basis cache at a fresh directory for the run."""
    path = str(tmp_path_factory.mktemp("basis_cache"))
    old = os.environ.get("SLIPSTOKES_CACHE")
    os.environ["SLIPSTOKES_CACHE"] = path
    yield path
    if old is None:
        os.environ.pop("SLIPSTOKES_CACHE", None)
    else:
        os.environ["SLIPSTOKES_CACHE"] = old


@pytest.fixture(scope="session")
def channel():
    return make_domain("channel")


@pytest.fixture(scope="session")
def ball():
    return make_domain("ball")


@pytest.fixture(scope="session")
def channel_grid(channel):
    return analysis.suite_grids(channel)[0]


@pytest.fixture(scope="session")
def ball_grid(ball):
    return analysis.suite_grids(ball)[0]


@pytest.fixture(scope="session")
def channel_bnd(channel_grid):
    return geometry.make_boundary(channel_grid)


@pytest.fixture(scope="session")
def ball_bnd(ball_grid):
    return geometry.make_boundary(ball_grid)


@pytest.fixture(scope="session")
def channel_basis(channel):
    """Small channel basis at unit slip (36 modes)."""
    return spectrum.build_basis(channel, SlipLength(1.0), 1, 2)


@pytest.fixture(scope="session")
def ball_basis(ball):
    """Full toroidal ball basis at unit slip (32 modes)."""
    return spectrum.build_basis(ball, SlipLength(1.0), 2, 4)


@pytest.fixture(scope="session")
def channel_tensor(channel_grid, channel_basis):
    return galerkin.build_convection(channel_grid, channel_basis)


@pytest.fixture(scope="session")
def channel_system(channel_basis, channel_tensor):
    return galerkin.GalerkinSystem(basis=channel_basis,
                                   tensor=channel_tensor, mu=0.05)
