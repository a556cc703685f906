"""Tikhonov scheme for smooth coefficients: L^p misfit plus H^1 penalties.

The functional is

    (1/p) ||F(mu) - E_data||^p_{L^p} + alpha (||mu_a - mu_a0||^2_{H^1}
                                             + ||mu_s - mu_s0||^2_{H^1})

minimized over the admissible box by projected L-BFGS with Armijo
backtracking (which keeps accepted functional values non-increasing). The
driver requires p = 2; other p in [1, 2] are supported for evaluation only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._optim import lbfgs_descent
from .forward import add_noise, compute_fluence, forward
from .geometry import AngularQuadrature, Grid2D, OpticalPair, PhaseMatrix
from .gradients import MisfitGradient, misfit_gradient
from .norms import h1_norm_sq, h1_representer, l2_cells, lp_cells
from .transport import BoundarySource, solve_rte


@dataclass
class TikhonovConfig:
    """Regularization weight, misfit exponent, priors, bounds, optimizer knobs."""

    alpha: float
    prior_a: np.ndarray
    prior_s: np.ndarray
    mu_lo: float
    mu_hi: float
    p: float = 2.0
    max_outer: int = 200
    grad_tol: float = 1e-8
    solver_tol: float = 1e-10
    memory: int = 10

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 1.0 <= self.p <= 2.0:
            raise ValueError(f"misfit exponent must be in [1, 2], got {self.p}")


def default_config(grid: Grid2D, alpha: float, mu_lo: float, mu_hi: float, **kwargs) -> TikhonovConfig:
    """Config with constant mid-range priors (override for informed guesses)."""
    mid = 0.5 * (mu_lo + mu_hi)
    prior = np.full(grid.shape, mid)
    return TikhonovConfig(alpha, prior, prior.copy(), mu_lo, mu_hi, **kwargs)


def penalty_value(pair: OpticalPair, cfg: TikhonovConfig, grid: Grid2D) -> float:
    """H^1 distance of the pair to the priors (without the alpha weight)."""
    return h1_norm_sq(pair.mu_a - cfg.prior_a, grid) + h1_norm_sq(
        pair.mu_s - cfg.prior_s, grid
    )


def eval_functional(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    pair: OpticalPair,
    E_data: np.ndarray,
    cfg: TikhonovConfig,
    q: np.ndarray | None = None,
    u0: BoundarySource | None = None,
) -> float:
    """(1/p)||F(pair) - E_data||^p_{L^p} + alpha * penalty."""
    E = forward(grid, quad, phase, pair, q=q, u0=u0, tol=cfg.solver_tol)
    misfit = lp_cells(E - E_data, grid, cfg.p) ** cfg.p / cfg.p
    return misfit + cfg.alpha * penalty_value(pair, cfg, grid)


def penalty_gradient(pair: OpticalPair, cfg: TikhonovConfig, grid: Grid2D) -> MisfitGradient:
    """2 alpha (I - Laplacian_N)(mu - mu_0) per coefficient.

    Exact transpose of the forward-difference H^1 penalty, so the pairing
    with any direction reproduces the penalty's directional derivative to
    machine precision.
    """
    if pair.mu_a.shape != cfg.prior_a.shape or pair.mu_s.shape != cfg.prior_s.shape:
        raise ValueError("prior shapes do not match the coefficient fields")
    g_a = 2.0 * cfg.alpha * h1_representer(pair.mu_a - cfg.prior_a, grid)
    g_s = 2.0 * cfg.alpha * h1_representer(pair.mu_s - cfg.prior_s, grid)
    return MisfitGradient(g_a, g_s)


def choose_alpha(delta: float, p: float = 2.0, c: float = 1.0, r: float | None = None) -> float:
    """Power rule alpha = c * delta^r with 0 < r < p.

    Both delta^p / alpha = delta^(p-r) / c and alpha itself then vanish as
    delta -> 0, which is what the convergence theory asks of the parameter
    choice. Default exponent r = p/2 balances the two limits.
    """
    if r is None:
        r = p / 2.0
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    if c <= 0.0:
        raise ValueError(f"c must be positive, got {c}")
    if not 0.0 < r < p:
        raise ValueError(f"exponent r must satisfy 0 < r < p, got r={r}, p={p}")
    return c * delta**r


@dataclass
class ReconstructionReport:
    """Final pair plus the accepted-iterate history of the descent."""

    pair: OpticalPair
    functional_values: list[float]
    grad_norms: list[float]
    step_lengths: list[float]
    iterations: int
    reason: str


def _stack(a: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.concatenate([a.ravel(), s.ravel()])


def _unstack(x: np.ndarray, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    n = shape[0] * shape[1]
    return x[:n].reshape(shape), x[n:].reshape(shape)


def reconstruct(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    E_data: np.ndarray,
    cfg: TikhonovConfig,
    q: np.ndarray | None = None,
    u0: BoundarySource | None = None,
) -> ReconstructionReport:
    """Projected L-BFGS minimization of the p = 2 Tikhonov functional.

    Starts from the priors; every iterate is clamped cellwise onto
    [mu_lo, mu_hi] so the whole trajectory stays admissible. Terminates at
    grad_tol on the projected gradient or after max_outer iterations.
    """
    if cfg.p != 2.0:
        raise ValueError("the descent driver requires p = 2 (evaluation supports p in [1, 2])")
    shape = grid.shape
    dot = lambda a, b: grid.cell_measure * float(np.dot(a, b))

    def fun(x: np.ndarray) -> tuple[float, object]:
        mu_a, mu_s = _unstack(x, shape)
        pair = OpticalPair(mu_a, mu_s, cfg.mu_lo, cfg.mu_hi)
        sol = solve_rte(grid, quad, phase, pair, q=q, u0=u0, tol=cfg.solver_tol)
        E = pair.mu_a * compute_fluence(sol.u, quad)
        value = 0.5 * l2_cells(E - E_data, grid) ** 2 + cfg.alpha * penalty_value(
            pair, cfg, grid
        )
        return value, (pair, sol.u)

    def grad(x: np.ndarray, aux) -> np.ndarray:
        pair, u = aux
        g_mis = misfit_gradient(grid, quad, phase, pair, u, E_data, tol=cfg.solver_tol)
        g_pen = penalty_gradient(pair, cfg, grid)
        return _stack(g_mis.g_a + g_pen.g_a, g_mis.g_s + g_pen.g_s)

    x0 = _stack(cfg.prior_a, cfg.prior_s)
    x, aux, rep = lbfgs_descent(
        x0,
        fun,
        grad,
        dot,
        lower=cfg.mu_lo,
        upper=cfg.mu_hi,
        max_iter=cfg.max_outer,
        grad_tol=cfg.grad_tol,
        memory=cfg.memory,
    )
    mu_a, mu_s = _unstack(x, shape)
    return ReconstructionReport(
        OpticalPair(mu_a, mu_s, cfg.mu_lo, cfg.mu_hi),
        rep.fvals,
        rep.grad_norms,
        rep.step_lengths,
        rep.iterations,
        rep.reason,
    )


@dataclass
class ConvergenceRow:
    delta: float
    alpha: float
    error: float
    error_a: float
    error_s: float


def convergence_study(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    truth: OpticalPair,
    deltas: list[float],
    cfg: TikhonovConfig,
    q: np.ndarray | None = None,
    u0: BoundarySource | None = None,
    seed: int = 0,
    alpha_c: float = 1.0,
    alpha_r: float | None = None,
) -> list[ConvergenceRow]:
    """Reconstruction error versus noise level with the power-law alpha rule.

    deltas are absolute L^2 noise levels, strictly decreasing; a trailing 0
    entry runs on exact data. The zero-noise row continues the alpha sequence
    one halving below the smallest positive delta (the rule itself needs
    delta > 0). Noise per row is seeded with seed + row index, so a fixed
    seed makes the whole table reproducible bit-exactly.
    """
    positive = [d for d in deltas if d > 0.0]
    if positive != sorted(positive, reverse=True) or len(set(deltas)) != len(deltas):
        raise ValueError("deltas must be strictly decreasing")
    E_exact = forward(grid, quad, phase, truth, q=q, u0=u0, tol=cfg.solver_tol)

    rows: list[ConvergenceRow] = []
    for idx, delta in enumerate(deltas):
        if delta > 0.0:
            alpha = choose_alpha(delta, cfg.p, alpha_c, alpha_r)
            E_data = add_noise(E_exact, delta, grid, seed + idx)
        else:
            alpha = choose_alpha(min(positive) / 2.0, cfg.p, alpha_c, alpha_r)
            E_data = E_exact
        run_cfg = replace(cfg, alpha=alpha)
        report = reconstruct(grid, quad, phase, E_data, run_cfg, q=q, u0=u0)
        err_a = l2_cells(report.pair.mu_a - truth.mu_a, grid)
        err_s = l2_cells(report.pair.mu_s - truth.mu_s, grid)
        rows.append(
            ConvergenceRow(delta, alpha, float(np.hypot(err_a, err_s)), err_a, err_s)
        )
    return rows
