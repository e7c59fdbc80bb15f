"""Structured grid of unit square elements.

Nodes are numbered row-major from the lower-left corner of the domain:
node ``row * (nx + 1) + col``. Element ``row * nx + col`` covers the unit
square ``[col, col + 1] x [row, row + 1]`` and lists its four nodes
counterclockwise starting at the lower-left corner.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GridMesh:
    nx: int
    ny: int
    conn: np.ndarray = field(repr=False)        # (n_elements, 4) node indices
    scatter_rows: np.ndarray = field(repr=False)  # assembly row indices, len 16*n_elements
    scatter_cols: np.ndarray = field(repr=False)  # assembly column indices

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    def node_index(self, col: int, row: int) -> int:
        return row * (self.nx + 1) + col

    def element_index(self, col: int, row: int) -> int:
        return row * self.nx + col

    def element_nodes(self, element: int) -> np.ndarray:
        return self.conn[element]

    def node_coords(self) -> np.ndarray:
        """(n_nodes, 2) array of node positions on the unit grid."""
        cols, rows = np.meshgrid(np.arange(self.nx + 1), np.arange(self.ny + 1))
        return np.column_stack([cols.ravel(), rows.ravel()]).astype(float)


def build_mesh(nx: int, ny: int) -> GridMesh:
    """Build a regular nx-by-ny mesh of unit quadrilateral elements."""
    if nx < 1 or ny < 1:
        raise ValueError(f"mesh dimensions must be positive, got {nx}x{ny}")

    cols, rows = np.meshgrid(np.arange(nx), np.arange(ny))
    cols = cols.ravel()
    rows = rows.ravel()
    lower_left = rows * (nx + 1) + cols
    conn = np.column_stack([
        lower_left,
        lower_left + 1,
        lower_left + nx + 2,
        lower_left + nx + 1,
    ])

    # Fixed scatter pattern for sparse assembly: entry (i, j) of each 4x4
    # element matrix lands at global (conn[e, i], conn[e, j]).
    scatter_rows = np.repeat(conn, 4, axis=1).ravel()
    scatter_cols = np.tile(conn, (1, 4)).ravel()
    return GridMesh(nx=nx, ny=ny, conn=conn,
                    scatter_rows=scatter_rows, scatter_cols=scatter_cols)
