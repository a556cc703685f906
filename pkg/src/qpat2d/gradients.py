"""Linearized forward map and adjoint-state gradient of the data misfit.

Convention: the misfit is J = (1/2) ||E_data - F(mu_a, mu_s)||^2_{L^2(Omega)}
and the adjoint source is mu_a * (E_data - F), so the fluence term of the
absorption gradient carries a leading minus sign. Gradients are plain L^2
representers; Sobolev smoothing enters only through the penalty terms of the
regularization schemes.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .forward import compute_fluence, forward
from .geometry import AngularQuadrature, Grid2D, OpticalPair, PhaseMatrix
from .norms import inner_cells, l2_cells
from .transport import BoundarySource, apply_phase_integral, solve_adjoint, solve_rte


class CoefficientDirection(NamedTuple):
    """Perturbation fields (d mu_a, d mu_s); free sign, not restricted to bounds."""

    d_a: np.ndarray
    d_s: np.ndarray


class MisfitGradient(NamedTuple):
    """L^2 representers of dJ/dmu_a and dJ/dmu_s (data term only)."""

    g_a: np.ndarray
    g_s: np.ndarray


def directional_derivative(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    pair: OpticalPair,
    u: np.ndarray,
    direction: CoefficientDirection,
    tol: float = 1e-12,
    max_iter: int | None = None,
) -> np.ndarray:
    """Derivative of the energy map along (d_a, d_s) at the solved radiance u.

    Solves the linearized transport problem
        T u' = -(d_a + d_s) u + d_s * PhaseIntegral(u)
    with absorbing (zero inflow) boundary conditions, then returns
        d_a * U + mu_a * Fluence(u').
    """
    d_a, d_s = direction
    rhs = -(d_a + d_s)[:, :, None] * u + d_s[:, :, None] * apply_phase_integral(
        u, phase, quad
    )
    sol = solve_rte(grid, quad, phase, pair, q=rhs, u0=None, tol=tol, max_iter=max_iter)
    return d_a * compute_fluence(u, quad) + pair.mu_a * compute_fluence(sol.u, quad)


def misfit_gradient(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    pair: OpticalPair,
    u: np.ndarray,
    E_data: np.ndarray,
    tol: float = 1e-12,
    max_iter: int | None = None,
) -> MisfitGradient:
    """Adjoint-state gradient of J = (1/2)||E_data - mu_a U||^2_{L^2(Omega)}.

    One adjoint solve per call; the forward radiance u is reused, never
    re-solved. With residual r = E_data - F and v the adjoint solution with
    isotropic source mu_a * r:

        g_a = -U r + sum_k w_k u_k v_k
        g_s = sum_k w_k u_k v_k - sum_k w_k u_k (sum_l w_l Theta[k,l] v_l)
    """
    if E_data.shape != pair.shape:
        raise ValueError(f"data shape {E_data.shape} does not match fields {pair.shape}")
    U = compute_fluence(u, quad)
    r = E_data - pair.mu_a * U
    q_adj = np.repeat((pair.mu_a * r)[:, :, None], quad.ns, axis=2)
    v = solve_adjoint(grid, quad, phase, pair, q_adj, tol=tol, max_iter=max_iter).u
    uv = compute_fluence(u * v, quad)
    g_a = -U * r + uv
    g_s = uv - compute_fluence(u * apply_phase_integral(v, phase, quad), quad)
    return MisfitGradient(g_a, g_s)


class FDCheckResult(NamedTuple):
    rows: list[tuple[float, float]]  # (step, relative error)
    best_step: float
    min_error: float
    pairing: float  # adjoint-gradient directional value the steps are checked against


def misfit_value(E_model: np.ndarray, E_data: np.ndarray, grid: Grid2D) -> float:
    return 0.5 * l2_cells(E_model - E_data, grid) ** 2


def fd_check(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    pair: OpticalPair,
    direction: CoefficientDirection,
    E_data: np.ndarray,
    steps: list[float],
    q: np.ndarray | None = None,
    u0: BoundarySource | None = None,
    tol: float = 1e-13,
) -> FDCheckResult:
    """Validate the adjoint gradient against central differences of J.

    For each step t the perturbed pairs mu +/- t * d must stay admissible
    (raises ValueError otherwise). Relative errors are reported per step along
    with the best step; a zero direction reports exact-zero matches.
    """
    u = solve_rte(grid, quad, phase, pair, q=q, u0=u0, tol=tol).u
    grad = misfit_gradient(grid, quad, phase, pair, u, E_data, tol=tol)
    pairing = inner_cells(grad.g_a, direction.d_a, grid) + inner_cells(
        grad.g_s, direction.d_s, grid
    )

    rows: list[tuple[float, float]] = []
    for t in steps:
        perturbed = []
        for sign in (+1.0, -1.0):
            shifted = OpticalPair(
                pair.mu_a + sign * t * direction.d_a,
                pair.mu_s + sign * t * direction.d_s,
                pair.mu_lo,
                pair.mu_hi,
            )
            E = forward(grid, quad, phase, shifted, q=q, u0=u0, tol=tol)
            perturbed.append(misfit_value(E, E_data, grid))
        fd = (perturbed[0] - perturbed[1]) / (2.0 * t)
        scale = max(abs(fd), abs(pairing))
        rows.append((t, abs(fd - pairing) / scale if scale > 0.0 else 0.0))

    best_step, min_error = min(rows, key=lambda row: row[1])
    return FDCheckResult(rows, best_step, min_error, pairing)
