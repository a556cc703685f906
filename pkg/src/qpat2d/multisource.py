"""Multiple-illumination data model: summed misfit and Kaczmarz-type sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._optim import StepLog, projected_gradient_step
from .forward import compute_fluence, forward
from .geometry import AngularQuadrature, Grid2D, OpticalPair, PhaseMatrix
from .gradients import misfit_gradient
from .norms import l2_cells, lp_cells
from .tikhonov import TikhonovConfig, penalty_gradient, penalty_value
from .transport import BoundarySource, solve_rte


def forward_multi(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    pair: OpticalPair,
    sources: Sequence[BoundarySource],
    q: np.ndarray | None = None,
    tol: float = 1e-10,
) -> list[np.ndarray]:
    """One forward solve per boundary source."""
    if len(sources) == 0:
        raise ValueError("illumination set must contain at least one source")
    return [forward(grid, quad, phase, pair, q=q, u0=u0, tol=tol) for u0 in sources]


def eval_multi_misfit(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    pair: OpticalPair,
    data: Sequence[np.ndarray],
    sources: Sequence[BoundarySource],
    p: float = 2.0,
    q: np.ndarray | None = None,
    tol: float = 1e-10,
) -> float:
    """Summed per-source misfit sum_m (1/p) ||E_m - F_m(pair)||^p."""
    if len(data) != len(sources):
        raise ValueError(
            f"{len(data)} data maps but {len(sources)} sources"
        )
    maps = forward_multi(grid, quad, phase, pair, sources, q=q, tol=tol)
    return sum(lp_cells(E - Em, grid, p) ** p / p for E, Em in zip(maps, data))


def gradient_step(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    pair: OpticalPair,
    E_data: np.ndarray,
    source: BoundarySource,
    alpha_eff: float,
    cfg: TikhonovConfig,
    q: np.ndarray | None = None,
    stationarity_tol: float = 1e-12,
) -> tuple[OpticalPair, StepLog]:
    """One projected gradient step on J_m + alpha_eff * penalty.

    The projection clamps onto [mu_lo, mu_hi] after the step; a stationary
    point (zero residual at exact data) is returned unchanged.
    """
    shape = grid.shape
    n = shape[0] * shape[1]
    dot = lambda a, b: grid.cell_measure * float(np.dot(a, b))

    def to_pair(x: np.ndarray) -> OpticalPair:
        return OpticalPair(x[:n].reshape(shape), x[n:].reshape(shape), cfg.mu_lo, cfg.mu_hi)

    def fun(x: np.ndarray):
        cand = to_pair(x)
        sol = solve_rte(grid, quad, phase, cand, q=q, u0=source, tol=cfg.solver_tol)
        E = cand.mu_a * compute_fluence(sol.u, quad)
        value = 0.5 * l2_cells(E - E_data, grid) ** 2 + alpha_eff * penalty_value(
            cand, cfg, grid
        )
        return value, (cand, sol.u)

    def grad(x: np.ndarray, aux) -> np.ndarray:
        cand, u = aux
        g_mis = misfit_gradient(grid, quad, phase, cand, u, E_data, tol=cfg.solver_tol)
        pen_cfg = TikhonovConfig(
            alpha_eff, cfg.prior_a, cfg.prior_s, cfg.mu_lo, cfg.mu_hi, p=cfg.p
        )
        g_pen = penalty_gradient(cand, pen_cfg, grid)
        return np.concatenate(
            [(g_mis.g_a + g_pen.g_a).ravel(), (g_mis.g_s + g_pen.g_s).ravel()]
        )

    x0 = np.concatenate([pair.mu_a.ravel(), pair.mu_s.ravel()])
    x, log = projected_gradient_step(
        x0,
        fun,
        grad,
        dot,
        lower=cfg.mu_lo,
        upper=cfg.mu_hi,
        stationarity_tol=stationarity_tol,
    )
    return to_pair(x), log


def kaczmarz_sweep(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    pair: OpticalPair,
    data: Sequence[np.ndarray],
    sources: Sequence[BoundarySource],
    cfg: TikhonovConfig,
    q: np.ndarray | None = None,
    stationarity_tol: float = 1e-12,
) -> tuple[OpticalPair, list[StepLog]]:
    """Cyclic per-source projected gradient updates; one full pass over the sources.

    Each substep works on its own misfit J_m plus the (alpha / N_m)-weighted
    penalty, so a full sweep applies one full penalty gradient. Accepted
    substeps never increase their own objective, and every intermediate pair
    stays admissible.
    """
    if len(data) != len(sources):
        raise ValueError(f"{len(data)} data maps but {len(sources)} sources")
    if len(sources) == 0:
        raise ValueError("illumination set must contain at least one source")
    alpha_eff = cfg.alpha / len(sources)
    logs: list[StepLog] = []
    current = pair
    for E_m, src in zip(data, sources):
        current, log = gradient_step(
            grid,
            quad,
            phase,
            current,
            E_m,
            src,
            alpha_eff,
            cfg,
            q=q,
            stationarity_tol=stationarity_tol,
        )
        logs.append(log)
    return current, logs
