"""Phantom construction: background plus disk/rectangle inclusions.

Geometry is specified in domain fractions; sharp inclusions are rasterized by
cell-center membership, smooth mode replaces each inclusion by a Gaussian
bump centered on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Grid2D, OpticalPair, require_admissible

SHAPES = ("disk", "rect")


@dataclass(frozen=True)
class Inclusion:
    """One inclusion: disk params are (cx, cy, r), rect params are (x0, y0, x1, y1)."""

    shape: str
    params: tuple[float, ...]
    mu_a: float
    mu_s: float

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown inclusion shape {self.shape!r}")
        expected = 3 if self.shape == "disk" else 4
        if len(self.params) != expected:
            raise ValueError(
                f"{self.shape} inclusion needs {expected} geometry values, got {len(self.params)}"
            )


@dataclass
class PhantomSpec:
    background_mu_a: float
    background_mu_s: float
    inclusions: list[Inclusion] = field(default_factory=list)
    smooth: bool = False
    smooth_width: float = 0.1  # Gaussian sigma as a fraction of lx


def _check_geometry(inc: Inclusion) -> None:
    if inc.shape == "disk":
        cx, cy, r = inc.params
        if r <= 0.0 or cx - r < 0.0 or cx + r > 1.0 or cy - r < 0.0 or cy + r > 1.0:
            raise ValueError(f"disk {inc.params} does not fit inside the domain")
    else:
        x0, y0, x1, y1 = inc.params
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            raise ValueError(f"rectangle {inc.params} does not fit inside the domain")


def _membership(inc: Inclusion, grid: Grid2D) -> np.ndarray:
    X, Y = grid.meshgrid()
    if inc.shape == "disk":
        cx, cy, r = inc.params
        return np.hypot(X - cx * grid.lx, Y - cy * grid.ly) <= r * grid.lx
    x0, y0, x1, y1 = inc.params
    return (
        (X >= x0 * grid.lx) & (X <= x1 * grid.lx) & (Y >= y0 * grid.ly) & (Y <= y1 * grid.ly)
    )


def _bump(inc: Inclusion, grid: Grid2D, sigma: float) -> np.ndarray:
    X, Y = grid.meshgrid()
    if inc.shape == "disk":
        cx, cy = inc.params[0], inc.params[1]
    else:
        x0, y0, x1, y1 = inc.params
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    d2 = (X - cx * grid.lx) ** 2 + (Y - cy * grid.ly) ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def make_phantom(spec: PhantomSpec, grid: Grid2D, mu_lo: float, mu_hi: float) -> OpticalPair:
    """Rasterize a phantom spec onto the grid; rejects out-of-bounds values/geometry."""
    mu_a = np.full(grid.shape, float(spec.background_mu_a))
    mu_s = np.full(grid.shape, float(spec.background_mu_s))
    for inc in spec.inclusions:
        _check_geometry(inc)
        if spec.smooth:
            bump = _bump(inc, grid, spec.smooth_width * grid.lx)
            mu_a += (inc.mu_a - spec.background_mu_a) * bump
            mu_s += (inc.mu_s - spec.background_mu_s) * bump
        else:
            inside = _membership(inc, grid)
            mu_a[inside] = inc.mu_a
            mu_s[inside] = inc.mu_s
    pair = OpticalPair(mu_a, mu_s, mu_lo, mu_hi)
    require_admissible(pair)
    return pair
