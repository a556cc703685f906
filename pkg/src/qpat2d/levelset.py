"""Level-set reconstruction of piecewise-constant coefficient pairs.

The coefficients are parameterized through a smoothed Heaviside projector
applied to two level-set fields, with four known material constants
b = (a1, a2, c1, c2). The minimized functional is

    ||F(P_eps(state)) - E_data||^2_{L^2}
        + alpha * [ TV(H_eps(phi_a)) + TV(H_eps(phi_s))
                    + ||phi_a - phi_a0||^2_{H^1} + ||phi_s - phi_s0||^2_{H^1}
                    + ||b||^2 ]

where TV is the smoothed total variation of the projected indicator. Its
gradient is assembled term by term as the exact discrete transpose of each
piece, so finite differences of the functional reproduce it on ramp-supported
directions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._optim import lbfgs_descent
from .forward import compute_fluence
from .geometry import AngularQuadrature, Grid2D, OpticalPair, PhaseMatrix
from .norms import grad_forward, grad_transpose, h1_norm_sq, h1_representer, l2_cells
from .transport import BoundarySource, solve_rte
from .gradients import misfit_gradient


def heaviside_eps(t: np.ndarray | float, eps: float) -> np.ndarray | float:
    """Smoothed Heaviside: 0 below -eps, linear ramp 1 + t/eps on [-eps, 0], 1 above.

    Coincides with the sharp Heaviside outside [-eps, 0]; in particular
    H_eps(0) = 1 and H_eps(-eps) = 0.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    t = np.asarray(t, dtype=np.float64)
    out = np.where(t > 0.0, 1.0, np.clip(1.0 + t / eps, 0.0, 1.0))
    return out if out.ndim else float(out)


def heaviside_eps_prime(t: np.ndarray | float, eps: float) -> np.ndarray | float:
    """Ramp derivative 1/eps on the open interval (-eps, 0), zero elsewhere.

    The endpoint values at t = -eps and t = 0 are set to zero (a measure-zero
    convention).
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    t = np.asarray(t, dtype=np.float64)
    out = np.where((t > -eps) & (t < 0.0), 1.0 / eps, 0.0)
    return out if out.ndim else float(out)


def heaviside_sharp(t: np.ndarray) -> np.ndarray:
    """Sharp Heaviside with H(0) = 1, matching the eps -> 0 limit of the ramp."""
    return np.where(np.asarray(t) >= 0.0, 1.0, 0.0)


@dataclass
class LevelSetState:
    """Level-set pair, material constants b = (a1, a2, c1, c2), ramp width, priors."""

    phi_a: np.ndarray
    phi_s: np.ndarray
    b: tuple[float, float, float, float]
    epsilon: float
    phi_a0: np.ndarray
    phi_s0: np.ndarray

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if len(self.b) != 4 or any(v <= 0.0 for v in self.b):
            raise ValueError(f"material constants must be 4 positive values, got {self.b}")


@dataclass
class LevelSetConfig:
    """Penalty weight, TV smoothing, bounds for the projected pair, optimizer knobs."""

    alpha: float
    mu_lo: float
    mu_hi: float
    beta_tv: float = 1e-8
    max_outer: int = 500
    grad_tol: float = 1e-10
    solver_tol: float = 1e-10
    memory: int = 10

    def validate_state(self, state: LevelSetState) -> None:
        for v in state.b:
            if not (self.mu_lo <= v <= self.mu_hi):
                raise ValueError(
                    f"material constant {v} outside bounds [{self.mu_lo}, {self.mu_hi}]"
                )


def project_peps(state: LevelSetState, mu_lo: float, mu_hi: float) -> OpticalPair:
    """Project the level sets onto coefficients: convex combinations of the constants.

    mu_a = a1 H_eps(phi_a) + a2 (1 - H_eps(phi_a)) and analogously for mu_s,
    so the output is admissible whenever the constants are inside the bounds.
    """
    a1, a2, c1, c2 = state.b
    ha = heaviside_eps(state.phi_a, state.epsilon)
    hs = heaviside_eps(state.phi_s, state.epsilon)
    return OpticalPair(a1 * ha + a2 * (1.0 - ha), c1 * hs + c2 * (1.0 - hs), mu_lo, mu_hi)


def tv_seminorm(z: np.ndarray, grid: Grid2D, beta_tv: float = 0.0) -> float:
    """Smoothed total variation sum sqrt(|grad z|^2 + beta^2) * cell measure."""
    if beta_tv < 0.0:
        raise ValueError(f"beta_tv must be nonnegative, got {beta_tv}")
    gx, gy = grad_forward(z, grid)
    return grid.cell_measure * float(np.sum(np.sqrt(gx * gx + gy * gy + beta_tv * beta_tv)))


def tv_gradient(z: np.ndarray, grid: Grid2D, beta_tv: float) -> np.ndarray:
    """L^2 representer of d/dz tv_seminorm: transpose of grad on the unit field.

    Equals minus the discrete divergence of grad z / sqrt(|grad z|^2 + beta^2);
    beta_tv removes the singularity at vanishing gradients.
    """
    gx, gy = grad_forward(z, grid)
    s = np.sqrt(gx * gx + gy * gy + beta_tv * beta_tv)
    return grad_transpose(gx / s, gy / s, grid)


def penalty_value_levelset(state: LevelSetState, grid: Grid2D, beta_tv: float) -> float:
    ha = heaviside_eps(state.phi_a, state.epsilon)
    hs = heaviside_eps(state.phi_s, state.epsilon)
    return (
        tv_seminorm(ha, grid, beta_tv)
        + tv_seminorm(hs, grid, beta_tv)
        + h1_norm_sq(state.phi_a - state.phi_a0, grid)
        + h1_norm_sq(state.phi_s - state.phi_s0, grid)
        + float(np.sum(np.square(state.b)))
    )


def eval_geps(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    state: LevelSetState,
    E_data: np.ndarray,
    alpha: float,
    cfg: LevelSetConfig,
    q: np.ndarray | None = None,
    u0: BoundarySource | None = None,
) -> float:
    """Numerically realizable level-set functional (squared misfit, no 1/2)."""
    pair = project_peps(state, cfg.mu_lo, cfg.mu_hi)
    sol = solve_rte(grid, quad, phase, pair, q=q, u0=u0, tol=cfg.solver_tol)
    E = pair.mu_a * compute_fluence(sol.u, quad)
    misfit = l2_cells(E - E_data, grid) ** 2
    return misfit + alpha * penalty_value_levelset(state, grid, cfg.beta_tv)


def _gradient_from_radiance(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    state: LevelSetState,
    pair: OpticalPair,
    u: np.ndarray,
    E_data: np.ndarray,
    alpha: float,
    cfg: LevelSetConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of eval_geps given the already-solved radiance at P_eps(state)."""
    a1, a2, c1, c2 = state.b
    g = misfit_gradient(grid, quad, phase, pair, u, E_data, tol=cfg.solver_tol)
    hpa = heaviside_eps_prime(state.phi_a, state.epsilon)
    hps = heaviside_eps_prime(state.phi_s, state.epsilon)
    ha = heaviside_eps(state.phi_a, state.epsilon)
    hs = heaviside_eps(state.phi_s, state.epsilon)

    # misfit in eval_geps is ||.||^2, twice the 1/2-convention representers
    grad_a = 2.0 * (a1 - a2) * hpa * g.g_a
    grad_s = 2.0 * (c1 - c2) * hps * g.g_s
    grad_a += alpha * hpa * tv_gradient(ha, grid, cfg.beta_tv)
    grad_s += alpha * hps * tv_gradient(hs, grid, cfg.beta_tv)
    grad_a += 2.0 * alpha * h1_representer(state.phi_a - state.phi_a0, grid)
    grad_s += 2.0 * alpha * h1_representer(state.phi_s - state.phi_s0, grid)
    return grad_a, grad_s


def levelset_gradient(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    state: LevelSetState,
    E_data: np.ndarray,
    alpha: float,
    cfg: LevelSetConfig,
    q: np.ndarray | None = None,
    u0: BoundarySource | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of eval_geps with respect to (phi_a, phi_s); b treated as known.

    Each term is the exact transpose of the corresponding piece of the
    functional: the chain rule through H_eps multiplies by the ramp indicator
    H'_eps, the TV term transports the normalized gradient back through the
    difference transpose, and the H^1 term is (I - Laplacian_N) with Neumann
    closure.
    """
    cfg.validate_state(state)
    pair = project_peps(state, cfg.mu_lo, cfg.mu_hi)
    sol = solve_rte(grid, quad, phase, pair, q=q, u0=u0, tol=cfg.solver_tol)
    return _gradient_from_radiance(
        grid, quad, phase, state, pair, sol.u, E_data, alpha, cfg
    )


def signed_distance_disk(grid: Grid2D, center: tuple[float, float], radius: float) -> np.ndarray:
    """Signed distance to a circle, positive inside (fractions of lx, ly for center)."""
    X, Y = grid.meshgrid()
    cx, cy = center[0] * grid.lx, center[1] * grid.ly
    return radius - np.hypot(X - cx, Y - cy)


def initial_state(
    grid: Grid2D,
    b: tuple[float, float, float, float],
    epsilon: float,
    radius_frac: float = 0.15,
) -> LevelSetState:
    """Default initialization: signed distance to a centered circle, priors = start."""
    phi = signed_distance_disk(grid, (0.5, 0.5), radius_frac * grid.lx)
    return LevelSetState(phi.copy(), phi.copy(), b, epsilon, phi.copy(), phi.copy())


def reconstruct_levelset(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    E_data: np.ndarray,
    state0: LevelSetState,
    cfg: LevelSetConfig,
    q: np.ndarray | None = None,
    u0: BoundarySource | None = None,
):
    """L-BFGS descent on (phi_a, phi_s) with backtracking; b stays fixed.

    Returns (final state, projected OpticalPair, DescentReport); accepted
    functional values are non-increasing.
    """
    cfg.validate_state(state0)
    shape = grid.shape
    n = shape[0] * shape[1]
    dot = lambda a, b_: grid.cell_measure * float(np.dot(a, b_))

    def to_state(x: np.ndarray) -> LevelSetState:
        return replace(state0, phi_a=x[:n].reshape(shape), phi_s=x[n:].reshape(shape))

    def fun(x: np.ndarray):
        state = to_state(x)
        pair = project_peps(state, cfg.mu_lo, cfg.mu_hi)
        sol = solve_rte(grid, quad, phase, pair, q=q, u0=u0, tol=cfg.solver_tol)
        E = pair.mu_a * compute_fluence(sol.u, quad)
        value = l2_cells(E - E_data, grid) ** 2 + cfg.alpha * penalty_value_levelset(
            state, grid, cfg.beta_tv
        )
        return value, (state, pair, sol.u)

    def grad(x: np.ndarray, aux) -> np.ndarray:
        state, pair, u = aux
        ga, gs = _gradient_from_radiance(
            grid, quad, phase, state, pair, u, E_data, cfg.alpha, cfg
        )
        return np.concatenate([ga.ravel(), gs.ravel()])

    x0 = np.concatenate([state0.phi_a.ravel(), state0.phi_s.ravel()])
    x, _, report = lbfgs_descent(
        x0,
        fun,
        grad,
        dot,
        max_iter=cfg.max_outer,
        grad_tol=cfg.grad_tol,
        memory=cfg.memory,
    )
    state = to_state(x)
    return state, project_peps(state, cfg.mu_lo, cfg.mu_hi), report


def eps_continuation(
    grid: Grid2D,
    quad: AngularQuadrature,
    phase: PhaseMatrix,
    E_data: np.ndarray,
    state0: LevelSetState,
    eps_list: list[float],
    cfg: LevelSetConfig,
    q: np.ndarray | None = None,
    u0: BoundarySource | None = None,
):
    """Warm-started reconstructions over a decreasing ramp-width sequence.

    Returns (states, gaps, reports) where gaps[k] is the L^1 distance
    ||H_{eps_k}(phi^k) - H_{eps_{k+1}}(phi^{k+1})||_{L^1} between successive
    projected indicators.
    """
    if list(eps_list) != sorted(eps_list, reverse=True) or len(set(eps_list)) != len(eps_list):
        raise ValueError("eps_list must be strictly decreasing")
    states, reports, gaps = [], [], []
    current = state0
    for eps in eps_list:
        current = replace(current, epsilon=eps)
        current, _, report = reconstruct_levelset(
            grid, quad, phase, E_data, current, cfg, q=q, u0=u0
        )
        states.append(current)
        reports.append(report)
    for prev, nxt in zip(states, states[1:]):
        diff = np.abs(
            heaviside_eps(prev.phi_a, prev.epsilon) - heaviside_eps(nxt.phi_a, nxt.epsilon)
        )
        gaps.append(grid.cell_measure * float(np.sum(diff)))
    return states, gaps, reports
