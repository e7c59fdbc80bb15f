"""Density-field export: binary PGM images and full-precision CSV.

Both formats store the field as ny rows of nx values with row 0 at the
top of the domain (image convention), so files compare directly with
rendered layouts.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def field_rows_top_down(values: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """Reshape a flat row-major (bottom-up) field into top-down image rows."""
    values = np.asarray(values, dtype=float)
    if values.shape != (nx * ny,):
        raise ValueError(f"field length {values.size} != {nx}*{ny}")
    return values.reshape(ny, nx)[::-1]


def write_pgm(path, values: np.ndarray, nx: int, ny: int,
              rho_min: float, rho_max: float) -> None:
    """Binary (P5) grayscale image, density linearly scaled to 0..255.

    Pixel = round(255 * (rho - rho_min) / (rho_max - rho_min)), ties up.
    """
    rows = field_rows_top_down(values, nx, ny)
    scaled = 255.0 * (rows - rho_min) / (rho_max - rho_min)
    pixels = np.floor(scaled + 0.5).astype(np.uint8)
    with open(path, "wb") as handle:
        handle.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        handle.write(pixels.tobytes())


def write_csv(path, values: np.ndarray, nx: int, ny: int) -> None:
    """CSV snapshot at full precision (shortest round-trip decimal)."""
    rows = field_rows_top_down(values, nx, ny)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        for row in rows:
            writer.writerow([np.format_float_positional(v, unique=True) for v in row])


def read_csv(path) -> np.ndarray:
    """Read a CSV snapshot back into a flat row-major (bottom-up) field."""
    with open(path, newline="") as handle:
        rows = [[float(cell) for cell in line] for line in csv.reader(handle) if line]
    if not rows:
        raise ValueError(f"empty snapshot file {path}")
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise ValueError(f"ragged snapshot file {path}")
    return np.array(rows[::-1], dtype=float).ravel()


def write_convergence(path, trace) -> None:
    """Per-iteration totals of a run as CSV."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "total_cost", "total_mass"])
        for row in trace.rows:
            writer.writerow([
                row.iteration,
                np.format_float_positional(row.total_cost, unique=True),
                np.format_float_positional(row.total_mass, unique=True),
            ])


def snapshot_paths(out_dir, iteration: int, formats: tuple[str, ...]) -> list[Path]:
    return [Path(out_dir) / f"density_t{iteration}.{fmt}" for fmt in formats]
