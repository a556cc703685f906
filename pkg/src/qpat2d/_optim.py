"""Projected limited-memory quasi-Newton descent with Armijo backtracking.

Shared by the smooth-coefficient and level-set reconstruction drivers. The
objective callable returns (value, aux) so that the expensive transport solve
performed during a line-search trial can be reused by the gradient evaluation
at the accepted point. All inner products go through a caller-supplied dot so
the drivers can work in the mesh-weighted L^2 metric.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Fun = Callable[[np.ndarray], tuple[float, object]]
Grad = Callable[[np.ndarray, object], np.ndarray]
Dot = Callable[[np.ndarray, np.ndarray], float]


@dataclass
class DescentReport:
    """Per-iterate history of an accepted-step descent run."""

    fvals: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    step_lengths: list[float] = field(default_factory=list)
    iterations: int = 0
    reason: str = ""


def _two_loop(g: np.ndarray, history: deque, dot: Dot) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * dot(s, q)
        alphas.append(a)
        q -= a * y
    if history:
        s, y, _ = history[-1]
        q *= dot(s, y) / dot(y, y)
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * dot(y, q)
        q += (a - b) * s
    return q


def _backtrack(
    x: np.ndarray,
    f: float,
    g: np.ndarray,
    d: np.ndarray,
    fun: Fun,
    dot: Dot,
    project: Callable[[np.ndarray], np.ndarray],
    c1: float,
    shrink: float,
    max_backtracks: int,
):
    """Armijo search along the projected arc; returns (x, f, aux, step) or None."""
    t = 1.0
    for _ in range(max_backtracks):
        xt = project(x + t * d)
        dx = xt - x
        slope = dot(g, dx)
        if slope < 0.0:
            ft, auxt = fun(xt)
            if ft <= f + c1 * slope:
                return xt, ft, auxt, t
        t *= shrink
    return None


def lbfgs_descent(
    x0: np.ndarray,
    fun: Fun,
    grad: Grad,
    dot: Dot,
    lower: np.ndarray | float | None = None,
    upper: np.ndarray | float | None = None,
    max_iter: int = 200,
    grad_tol: float = 1e-8,
    memory: int = 10,
    c1: float = 1e-4,
    shrink: float = 0.5,
    max_backtracks: int = 40,
) -> tuple[np.ndarray, object, DescentReport]:
    """Minimize fun with projected L-BFGS; accepted values are non-increasing.

    Termination: projected-gradient norm <= grad_tol, iteration budget, or a
    failed line search (the best iterate so far is returned with the reason).
    """
    bounded = lower is not None or upper is not None

    def project(z: np.ndarray) -> np.ndarray:
        return np.clip(z, lower, upper) if bounded else z

    x = project(np.asarray(x0, dtype=np.float64))
    f, aux = fun(x)
    g = grad(x, aux)
    history: deque = deque(maxlen=memory)
    report = DescentReport(fvals=[f])

    for it in range(max_iter):
        pg = x - project(x - g)
        pg_norm = float(np.sqrt(dot(pg, pg)))
        report.grad_norms.append(pg_norm)
        if pg_norm <= grad_tol:
            report.reason = "converged"
            report.iterations = it
            return x, aux, report

        d = -_two_loop(g, history, dot)
        if not np.all(np.isfinite(d)) or dot(g, d) >= 0.0:
            history.clear()
            d = -g
        hit = _backtrack(x, f, g, d, fun, dot, project, c1, shrink, max_backtracks)
        if hit is None and history:
            # quasi-Newton direction too poor: restart from steepest descent
            history.clear()
            hit = _backtrack(x, f, g, -g, fun, dot, project, c1, shrink, max_backtracks)
        if hit is None:
            report.reason = "line_search_failure"
            report.iterations = it
            return x, aux, report

        xt, ft, auxt, t = hit
        gt = grad(xt, auxt)
        s, y = xt - x, gt - g
        sy = dot(s, y)
        if sy > 0.0:
            history.append((s, y, 1.0 / sy))
        x, f, g, aux = xt, ft, gt, auxt
        report.fvals.append(f)
        report.step_lengths.append(t)

    report.reason = "max_iter"
    report.iterations = max_iter
    return x, aux, report


@dataclass
class StepLog:
    """Outcome of a single projected gradient step."""

    value_before: float
    value_after: float
    grad_norm: float
    step_length: float
    skipped: bool


def projected_gradient_step(
    x: np.ndarray,
    fun: Fun,
    grad: Grad,
    dot: Dot,
    lower: np.ndarray | float | None = None,
    upper: np.ndarray | float | None = None,
    c1: float = 1e-4,
    shrink: float = 0.5,
    max_backtracks: int = 40,
    stationarity_tol: float = 1e-12,
) -> tuple[np.ndarray, StepLog]:
    """One projected steepest-descent step with Armijo backtracking.

    Near-stationary points (projected gradient below stationarity_tol) are
    skipped so that exact-data fixed points are returned bit-unchanged.
    """
    bounded = lower is not None or upper is not None

    def project(z: np.ndarray) -> np.ndarray:
        return np.clip(z, lower, upper) if bounded else z

    x0 = np.asarray(x, dtype=np.float64)
    x = project(x0)
    f, aux = fun(x)
    g = grad(x, aux)
    pg = x - project(x - g)
    pg_norm = float(np.sqrt(dot(pg, pg)))
    if pg_norm <= stationarity_tol:
        return x0, StepLog(f, f, pg_norm, 0.0, True)

    hit = _backtrack(x, f, g, -g, fun, dot, project, c1, shrink, max_backtracks)
    if hit is None:
        return x0, StepLog(f, f, pg_norm, 0.0, True)
    xt, ft, _, t = hit
    return xt, StepLog(f, ft, pg_norm, t, False)
