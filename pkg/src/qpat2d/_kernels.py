"""Compiled sweep kernels. The per-ordinate upwind solve is sequential in the
downwind cell order, so it lives in a numba kernel; everything else in the
transport module is vectorized numpy."""

import numba
import numpy as np


@numba.njit(cache=True)
def sweep_ordinate(rhs, mu_t, axx, ayy, sx, sy, ghost_x, ghost_y, out):
    """Solve (|cx|/hx + |cy|/hy + mu_t) u = rhs + upstream terms in one pass.

    axx = |cx|/hx, ayy = |cy|/hy; sx, sy in {+1, -1} give the downwind cell
    order. ghost_x (ny,) and ghost_y (nx,) are the inflow face values used as
    upstream neighbors for the first cell layer.
    """
    nx, ny = rhs.shape
    i0 = 0 if sx > 0 else nx - 1
    j0 = 0 if sy > 0 else ny - 1
    for ii in range(nx):
        i = i0 + sx * ii
        for jj in range(ny):
            j = j0 + sy * jj
            ux = ghost_x[j] if ii == 0 else out[i - sx, j]
            uy = ghost_y[i] if jj == 0 else out[i, j - sy]
            out[i, j] = (rhs[i, j] + axx * ux + ayy * uy) / (axx + ayy + mu_t[i, j])


@numba.njit(cache=True)
def upwind_apply_ordinate(u, mu_t, axx, ayy, sx, sy, ghost_x, ghost_y, out):
    """Apply (s . grad + mu_t) with the same upwind stencil the sweep inverts."""
    nx, ny = u.shape
    i0 = 0 if sx > 0 else nx - 1
    j0 = 0 if sy > 0 else ny - 1
    for ii in range(nx):
        i = i0 + sx * ii
        for jj in range(ny):
            j = j0 + sy * jj
            ux = ghost_x[j] if ii == 0 else u[i - sx, j]
            uy = ghost_y[i] if jj == 0 else u[i, j - sy]
            out[i, j] = axx * (u[i, j] - ux) + ayy * (u[i, j] - uy) + mu_t[i, j] * u[i, j]
