"""Spatial grid, angular quadrature, scattering kernel and admissible coefficients.

All values are immutable after construction and safe to share across threads.
Fields are stored as 64-bit floats in row-major cell-then-ordinate layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centered grid on an axis-aligned rectangle.

    Cell (i, j) has its center at ((i + 0.5) * hx, (j + 0.5) * hy).
    """

    nx: int
    ny: int
    lx: float
    ly: float

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_measure(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def cell_centers_x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    def cell_centers_y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates as (nx, ny) arrays."""
        return np.meshgrid(self.cell_centers_x(), self.cell_centers_y(), indexing="ij")


def build_grid(nx: int, ny: int, lx: float, ly: float) -> Grid2D:
    """Build a uniform rectangular grid; counts must be >= 2, sides positive."""
    if nx < 2 or ny < 2:
        raise ValueError(f"cell counts must be >= 2, got nx={nx}, ny={ny}")
    if lx <= 0.0 or ly <= 0.0:
        raise ValueError(f"side lengths must be positive, got lx={lx}, ly={ly}")
    return Grid2D(int(nx), int(ny), float(lx), float(ly))


@dataclass(frozen=True)
class AngularQuadrature:
    """Half-offset equiangular ordinates on the unit circle with uniform weights.

    theta_k = 2*pi*(k + 0.5)/ns keeps every ordinate away from the grid-face
    tangential directions, and even ns guarantees that -s_k is again an
    ordinate (index (k + ns/2) mod ns), which the adjoint sweeps rely on.
    """

    ns: int
    theta: np.ndarray      # (ns,)
    directions: np.ndarray  # (ns, 2), unit vectors
    weights: np.ndarray    # (ns,), all equal to 2*pi/ns

    def opposite(self, k: int) -> int:
        """Index of the ordinate pointing exactly opposite to ordinate k."""
        return (k + self.ns // 2) % self.ns

    def reverse(self, u: np.ndarray) -> np.ndarray:
        """Reindex a per-ordinate array so direction k becomes direction -s_k."""
        idx = (np.arange(self.ns) + self.ns // 2) % self.ns
        return np.ascontiguousarray(u[..., idx])


def build_quadrature(ns: int) -> AngularQuadrature:
    """Build the half-offset equiangular quadrature; ns must be even and >= 4."""
    if ns < 4:
        raise ValueError(f"ordinate count must be >= 4, got {ns}")
    if ns % 2 != 0:
        raise ValueError(f"ordinate count must be even, got {ns}")
    theta = TWO_PI * (np.arange(ns) + 0.5) / ns
    directions = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    weights = np.full(ns, TWO_PI / ns)
    return AngularQuadrature(int(ns), theta, directions, weights)


@dataclass(frozen=True)
class PhaseMatrix:
    """Quadrature-normalized scattering kernel between ordinate pairs.

    Entry values[k, l] is the density for scattering from ordinate l into
    ordinate k; every column satisfies sum_k w_k * values[k, l] = 1.
    """

    values: np.ndarray  # (ns, ns)
    g: float


def hg_kernel(g: float, dtheta: np.ndarray | float) -> np.ndarray | float:
    """2-D Henyey-Greenstein kernel (1/2pi)(1-g^2)/(1+g^2-2g cos dtheta)."""
    return (1.0 - g * g) / (TWO_PI * (1.0 + g * g - 2.0 * g * np.cos(dtheta)))


def build_phase_hg(g: float, quad: AngularQuadrature) -> PhaseMatrix:
    """Henyey-Greenstein phase matrix, column-rescaled to unit quadrature sums.

    The kernel is evaluated on the symmetric index distance so the matrix is
    an exactly symmetric circulant; a single scale factor then normalizes all
    columns at once.
    """
    if not abs(g) < 1.0:
        raise ValueError(f"anisotropy must satisfy |g| < 1, got {g}")
    ns = quad.ns
    m = np.arange(ns)
    sep = np.minimum(m, ns - m)  # symmetric angular-index separation
    kernel = hg_kernel(g, TWO_PI * sep / ns)
    colsum = quad.weights[0] * kernel.sum()
    kernel = kernel / colsum
    values = kernel[(m[:, None] - m[None, :]) % ns]
    return PhaseMatrix(values, float(g))


@dataclass(frozen=True)
class OpticalPair:
    """Absorption/scattering fields (units 1/length) with their box bounds.

    Admissible pairs satisfy mu_lo <= mu_a, mu_s <= mu_hi cellwise. The
    reconstruction drivers require a strictly positive mu_lo; forward-only
    configurations (e.g. the collimated pure-absorber oracle) may use
    mu_lo = 0.
    """

    mu_a: np.ndarray
    mu_s: np.ndarray
    mu_lo: float
    mu_hi: float

    def __post_init__(self):
        object.__setattr__(self, "mu_a", np.asarray(self.mu_a, dtype=np.float64))
        object.__setattr__(self, "mu_s", np.asarray(self.mu_s, dtype=np.float64))
        if self.mu_lo < 0.0 or self.mu_hi <= 0.0 or self.mu_hi < self.mu_lo:
            raise ValueError(
                f"invalid bounds [{self.mu_lo}, {self.mu_hi}]"
            )

    @property
    def mu_t(self) -> np.ndarray:
        """Total attenuation mu_a + mu_s."""
        return self.mu_a + self.mu_s

    @property
    def shape(self) -> tuple[int, int]:
        return self.mu_a.shape


@dataclass(frozen=True)
class AdmissibilityViolation:
    """First cell found outside the admissible box, for error reporting."""

    field_name: str
    index: tuple[int, int]
    value: float
    mu_lo: float
    mu_hi: float

    def __str__(self) -> str:
        return (
            f"{self.field_name}[{self.index[0]}, {self.index[1]}] = {self.value} "
            f"outside [{self.mu_lo}, {self.mu_hi}]"
        )


def validate_admissible(pair: OpticalPair) -> AdmissibilityViolation | None:
    """Check cellwise box membership; return the first violation, else None.

    Raises ValueError if the two fields have different shapes.
    """
    if pair.mu_a.shape != pair.mu_s.shape:
        raise ValueError(
            f"field shapes differ: mu_a {pair.mu_a.shape} vs mu_s {pair.mu_s.shape}"
        )
    for name, field in (("mu_a", pair.mu_a), ("mu_s", pair.mu_s)):
        bad = ~((pair.mu_lo <= field) & (field <= pair.mu_hi))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            return AdmissibilityViolation(
                name, (int(i), int(j)), float(field[i, j]), pair.mu_lo, pair.mu_hi
            )
    return None


def require_admissible(pair: OpticalPair) -> None:
    """Raise ValueError with the first violating cell if the pair is outside bounds."""
    violation = validate_admissible(pair)
    if violation is not None:
        raise ValueError(f"inadmissible coefficients: {violation}")
