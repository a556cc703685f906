"""Discrete norms and inner products on cell fields and radiance arrays.

The L^2(Omega) norm carries the cell measure hx*hy so that noise levels and
penalty weights are mesh-independent; radiance norms additionally carry the
quadrature weights.
"""

from __future__ import annotations

import numpy as np

from .geometry import AngularQuadrature, Grid2D


def inner_cells(a: np.ndarray, b: np.ndarray, grid: Grid2D) -> float:
    """L^2(Omega) inner product of two cell fields."""
    return grid.cell_measure * float(np.dot(a.ravel(), b.ravel()))


def l2_cells(f: np.ndarray, grid: Grid2D) -> float:
    return float(np.sqrt(inner_cells(f, f, grid)))


def lp_cells(f: np.ndarray, grid: Grid2D, p: float) -> float:
    """Discrete L^p(Omega) norm; p = inf gives the cellwise max magnitude."""
    if p == np.inf:
        return float(np.max(np.abs(f)))
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float((grid.cell_measure * np.sum(np.abs(f) ** p)) ** (1.0 / p))


def inner_radiance(u: np.ndarray, v: np.ndarray, grid: Grid2D, quad: AngularQuadrature) -> float:
    """L^2(D) inner product over cells and ordinates."""
    return grid.cell_measure * float(np.sum(u * v * quad.weights))


def l2_radiance(u: np.ndarray, grid: Grid2D, quad: AngularQuadrature) -> float:
    return float(np.sqrt(inner_radiance(u, u, grid, quad)))


def lp_radiance(u: np.ndarray, grid: Grid2D, quad: AngularQuadrature, p: float) -> float:
    """Discrete L^p(D) norm over cells and ordinates; p = inf ignores weights."""
    if p == np.inf:
        return float(np.max(np.abs(u)))
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float((grid.cell_measure * np.sum(np.abs(u) ** p * quad.weights)) ** (1.0 / p))


def grad_forward(z: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Forward-difference gradient with Neumann closure (zero at the far faces)."""
    gx = np.zeros_like(z)
    gy = np.zeros_like(z)
    gx[:-1, :] = (z[1:, :] - z[:-1, :]) / grid.hx
    gy[:, :-1] = (z[:, 1:] - z[:, :-1]) / grid.hy
    return gx, gy


def grad_transpose(gx: np.ndarray, gy: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Transpose of grad_forward in the L^2(Omega) pairing.

    Entries on the far faces of gx/gy are ignored, matching the Neumann
    closure of the forward operator.
    """
    out = np.zeros_like(gx)
    out[:-1, :] -= gx[:-1, :] / grid.hx
    out[1:, :] += gx[:-1, :] / grid.hx
    out[:, :-1] -= gy[:, :-1] / grid.hy
    out[:, 1:] += gy[:, :-1] / grid.hy
    return out


def h1_seminorm_sq(z: np.ndarray, grid: Grid2D) -> float:
    gx, gy = grad_forward(z, grid)
    return inner_cells(gx, gx, grid) + inner_cells(gy, gy, grid)


def h1_norm_sq(z: np.ndarray, grid: Grid2D) -> float:
    """Squared discrete H^1 norm: L^2 part plus forward-difference gradient part."""
    return inner_cells(z, z, grid) + h1_seminorm_sq(z, grid)


def h1_representer(z: np.ndarray, grid: Grid2D) -> np.ndarray:
    """(I - Laplacian_N) z, the exact L^2 representer of d/dz (1/2)||z||_H1^2.

    Laplacian_N is the 5-point Laplacian closed with reflected (Neumann)
    ghost cells; by construction it is the exact transpose of the
    forward-difference gradient used in h1_norm_sq.
    """
    gx, gy = grad_forward(z, grid)
    return z + grad_transpose(gx, gy, grid)
