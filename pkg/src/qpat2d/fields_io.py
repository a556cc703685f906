"""Field serialization: lossless CSV round-trips and 16-bit PGM previews.

CSV layout: a header row naming "nx,ny,lx,ly", a second row with their
values, then nx rows of ny comma-separated cell values (row-major, x index
outermost). Floats are written with 17 significant digits so float64 values
round-trip bit-exactly. The PGM preview is lossy by design: linear min-max
scaling to 16-bit gray, raster rows from the top of the domain down.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import Grid2D, build_grid

_FMT = "%.17g"


def save_field_csv(path: str | Path, field: np.ndarray, grid: Grid2D) -> None:
    field = np.asarray(field, dtype=np.float64)
    if field.shape != grid.shape:
        raise ValueError(f"field shape {field.shape} does not match grid {grid.shape}")
    lines = ["nx,ny,lx,ly"]
    lines.append(f"{grid.nx},{grid.ny},{_FMT % grid.lx},{_FMT % grid.ly}")
    for i in range(grid.nx):
        lines.append(",".join(_FMT % v for v in field[i, :]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_field_csv(path: str | Path, grid: Grid2D | None = None) -> tuple[np.ndarray, Grid2D]:
    """Load a field; if a grid is given, the header must match it exactly."""
    lines = Path(path).read_text().strip().splitlines()
    if len(lines) < 2 or lines[0].strip() != "nx,ny,lx,ly":
        raise ValueError(f"{path}: missing 'nx,ny,lx,ly' header row")
    header = lines[1].split(",")
    if len(header) != 4:
        raise ValueError(f"{path}: malformed header values {lines[1]!r}")
    nx, ny = int(header[0]), int(header[1])
    lx, ly = float(header[2]), float(header[3])
    file_grid = build_grid(nx, ny, lx, ly)
    if grid is not None and (nx, ny, lx, ly) != (grid.nx, grid.ny, grid.lx, grid.ly):
        raise ValueError(
            f"{path}: header grid {nx}x{ny} ({lx}x{ly}) does not match expected "
            f"{grid.nx}x{grid.ny} ({grid.lx}x{grid.ly})"
        )
    if len(lines) != 2 + nx:
        raise ValueError(f"{path}: expected {nx} data rows, found {len(lines) - 2}")
    field = np.empty((nx, ny))
    for i, line in enumerate(lines[2:]):
        row = line.split(",")
        if len(row) != ny:
            raise ValueError(f"{path}: row {i} has {len(row)} values, expected {ny}")
        field[i, :] = [float(v) for v in row]
    return field, file_grid


def save_field_pgm(path: str | Path, field: np.ndarray) -> None:
    """16-bit ASCII PGM preview with linear min-max scaling (lossy)."""
    field = np.asarray(field, dtype=np.float64)
    lo, hi = float(field.min()), float(field.max())
    if hi > lo:
        scaled = np.rint((field - lo) / (hi - lo) * 65535.0).astype(np.int64)
    else:
        scaled = np.zeros(field.shape, dtype=np.int64)
    nx, ny = field.shape
    lines = ["P2", f"{nx} {ny}", "65535"]
    for j in range(ny - 1, -1, -1):  # top row of the image = top of the domain
        lines.append(" ".join(str(v) for v in scaled[:, j]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(path: str | Path, entries: dict[str, object]) -> None:
    """Line-delimited key=value manifest, keys sorted for determinism."""
    lines = [f"{k}={entries[k]}" for k in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n")


def save_table_csv(path: str | Path, header: list[str], rows: list[tuple]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_FMT % v if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
