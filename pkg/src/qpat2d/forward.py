"""Fluence, absorbed-energy forward map, pressure conversion and noise model."""

from __future__ import annotations

import numpy as np

from .geometry import AngularQuadrature, Grid2D, OpticalPair, PhaseMatrix
from .norms import l2_cells
from .transport import BoundarySource, solve_rte


def compute_fluence(u: np.ndarray, quad: AngularQuadrature) -> np.ndarray:
    """Angular integral of the radiance: U(x) = sum_k w_k u(x, s_k)."""
    if u.shape[-1] != quad.ns:
        raise ValueError(f"radiance has {u.shape[-1]} ordinates, quadrature has {quad.ns}")
    return np.tensordot(u, quad.weights, axes=(2, 0))


def forward(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    pair: OpticalPair,
    q: np.ndarray | None = None,
    u0: BoundarySource | None = None,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> np.ndarray:
    """Absorbed-energy map E = mu_a * U for the given sources."""
    sol = solve_rte(grid, quad, phase, pair, q=q, u0=u0, tol=tol, max_iter=max_iter)
    return pair.mu_a * compute_fluence(sol.u, quad)


def energy_from_pressure(p0: np.ndarray, gruneisen: np.ndarray | float) -> np.ndarray:
    """Convert initial pressure to absorbed energy, E = p0 / Pi.

    The Grueneisen field is treated as known; values must be positive.
    """
    pi_field = np.asarray(gruneisen, dtype=np.float64)
    if np.any(pi_field <= 0.0):
        raise ValueError("Grueneisen parameter must be positive everywhere")
    return np.asarray(p0, dtype=np.float64) / pi_field


def add_noise(E: np.ndarray, delta: float, grid: Grid2D, seed: int) -> np.ndarray:
    """Additive Gaussian-shaped noise calibrated to an exact L^2(Omega) level.

    Returns E + delta * eta / ||eta||_L2 with eta a seeded standard-normal
    field, so that ||E - E_noisy||_L2 equals delta exactly (cell-measure
    weighted, hence mesh-independent). delta = 0 returns a copy of E.
    """
    if delta < 0.0:
        raise ValueError(f"noise level must be nonnegative, got {delta}")
    if delta == 0.0:
        return E.copy()
    rng = np.random.default_rng(seed)
    eta = rng.standard_normal(E.shape)
    return E + delta * eta / l2_cells(eta, grid)
