import numpy as np
import pytest

from qpat2d import (
    OpticalPair,
    boundary_source_patch,
    build_grid,
    build_phase_hg,
    build_quadrature,
)

MU_LO, MU_HI = 0.01, 10.0


@pytest.fixture
def grid8():
    return build_grid(8, 8, 1.0, 1.0)


@pytest.fixture
def grid16():
    return build_grid(16, 16, 1.0, 1.0)


@pytest.fixture
def quad8():
    return build_quadrature(8)


@pytest.fixture
def quad16():
    return build_quadrature(16)


@pytest.fixture
def phase_iso8(quad8):
    return build_phase_hg(0.0, quad8)


@pytest.fixture
def phase_iso16(quad16):
    return build_phase_hg(0.0, quad16)


def homogeneous_pair(grid, mu_a=0.1, mu_s=1.0):
    return OpticalPair(
        np.full(grid.shape, mu_a), np.full(grid.shape, mu_s), MU_LO, MU_HI
    )


def random_pair(grid, rng, scatter_ratio_max=0.9):
    """Random admissible pair with cellwise scattering ratio below the cap."""
    mu_t = rng.uniform(0.5, 2.0, grid.shape)
    ratio = rng.uniform(0.3, scatter_ratio_max, grid.shape)
    mu_s = mu_t * ratio
    mu_a = mu_t - mu_s
    return OpticalPair(mu_a, mu_s, MU_LO, MU_HI)


def left_patch(grid, quad, center=0.5, width=0.6, intensity=1.0):
    return boundary_source_patch(grid, quad, "left", center, width, intensity)
