"""Uniform quadrilateral meshes of the unit square."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class Cell(NamedTuple):
    index: int
    vertex_ids: tuple[int, int, int, int]  # counter-clockwise from lower-left


@dataclass(frozen=True)
class Mesh:
    """Uniform partition of (0,1)^2 into 4^level congruent axis-aligned squares.

    Cells and vertices are numbered row-major (x fastest), which fixes all
    derived dof layouts.  Instances are immutable.
    """

    level: int
    vertices: np.ndarray        # (n_vertices, 2)
    cells: np.ndarray           # (n_cells, 4) vertex ids, CCW from lower-left
    edge_length: float
    cells_per_side: int

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def cell(self, index: int) -> Cell:
        return Cell(index, tuple(int(v) for v in self.cells[index]))

    def cell_centers(self) -> np.ndarray:
        """Centers of all cells, shape (n_cells, 2)."""
        lower_left = self.vertices[self.cells[:, 0]]
        return lower_left + 0.5 * self.edge_length


def build_uniform_mesh(level: int) -> Mesh:
    """Build the level-`level` uniform quadrilateral mesh of the unit square.

    Level 1 splits the square into four congruent cells; each further level
    halves the edge length.
    """
    if level < 1:
        raise ValueError(f"mesh level must be >= 1, got {level}")
    n = 2 ** level
    coords_1d = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(coords_1d, coords_1d, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ix = ix.ravel()
    iy = iy.ravel()
    v00 = iy * (n + 1) + ix
    cells = np.column_stack([v00, v00 + 1, v00 + n + 2, v00 + n + 1])

    return Mesh(
        level=level,
        vertices=vertices,
        cells=cells,
        edge_length=1.0 / n,
        cells_per_side=n,
    )


def reference_map(mesh: Mesh, cell_index: int, xhat: np.ndarray):
    """Map reference coordinates in [-1,1]^2 onto a physical cell.

    Returns the mapped points and the constant Jacobian diag(e/2, e/2) of the
    affine map F_K(xhat) = center(K) + (e/2) * xhat.
    """
    xhat = np.asarray(xhat, dtype=float)
    half = 0.5 * mesh.edge_length
    center = mesh.vertices[mesh.cells[cell_index, 0]] + half
    points = center + half * xhat
    jacobian = np.diag([half, half])
    return points, jacobian
