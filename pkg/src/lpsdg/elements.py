"""Reference elements and global finite element spaces on uniform quad meshes.

Velocity uses continuous tensor-product Lagrange elements Q_r, optionally
enriched by two cell-interior bubbles (1-x^2)(1-y^2)*x^(r-1) and
(1-x^2)(1-y^2)*y^(r-1).  Pressure uses discontinuous total-degree polynomials
P_{r-1} in reference coordinates per cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .temporal import barycentric_weights

Q_FAMILY = "Q"
Q_BUBBLE_FAMILY = "Q_bubble"
P_DISC_FAMILY = "P_disc"


@dataclass(frozen=True)
class ReferenceElement:
    family: str
    order: int          # r; the P_disc family has polynomial degree r-1
    local_dim: int
    nodes: np.ndarray | None      # (n_nodes, 2) defining nodes of the Q part
    monomials: np.ndarray | None  # (local_dim, 2) exponents for P_disc

    def tabulate(self, points: np.ndarray):
        """Values and reference gradients at `points` in [-1,1]^2.

        Returns (values, grads) with shapes (local_dim, n) and (local_dim, n, 2).
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.family == P_DISC_FAMILY:
            return _tabulate_monomials(self.monomials, points)
        r = self.order
        values, grads = _tabulate_q(r, points)
        if self.family == Q_BUBBLE_FAMILY:
            bv, bg = _tabulate_bubbles(r, points)
            values = np.vstack([values, bv])
            grads = np.concatenate([grads, bg], axis=0)
        return values, grads


def _lagrange_1d(nodes: np.ndarray, x: np.ndarray):
    """1D Lagrange basis values and derivatives at x, shapes (len(nodes), len(x))."""
    n = len(nodes)
    w = barycentric_weights(nodes)
    values = np.empty((n, len(x)))
    derivs = np.empty((n, len(x)))
    for j in range(n):
        others = [m for m in range(n) if m != j]
        prod = np.ones_like(x)
        dsum = np.zeros_like(x)
        for m in others:
            prod *= x - nodes[m]
        for m in others:
            term = np.ones_like(x)
            for l in others:
                if l != m:
                    term *= x - nodes[l]
            dsum += term
        values[j] = w[j] * prod
        derivs[j] = w[j] * dsum
    return values, derivs


def _tabulate_q(r: int, points: np.ndarray):
    nodes_1d = np.linspace(-1.0, 1.0, r + 1)
    vx, dx = _lagrange_1d(nodes_1d, points[:, 0])
    vy, dy = _lagrange_1d(nodes_1d, points[:, 1])
    nloc = (r + 1) ** 2
    n = points.shape[0]
    values = np.empty((nloc, n))
    grads = np.empty((nloc, n, 2))
    for b in range(r + 1):        # y index
        for a in range(r + 1):    # x index, fastest
            idx = b * (r + 1) + a
            values[idx] = vx[a] * vy[b]
            grads[idx, :, 0] = dx[a] * vy[b]
            grads[idx, :, 1] = vx[a] * dy[b]
    return values, grads


def _tabulate_bubbles(r: int, points: np.ndarray):
    x, y = points[:, 0], points[:, 1]
    wx = 1.0 - x**2
    wy = 1.0 - y**2
    n = points.shape[0]
    values = np.empty((2, n))
    grads = np.empty((2, n, 2))
    for i, s in enumerate((x, y)):
        mono = s ** (r - 1)
        dmono = (r - 1) * s ** (r - 2) if r >= 2 else np.zeros_like(s)
        values[i] = wx * wy * mono
        if i == 0:
            grads[i, :, 0] = (-2.0 * x) * wy * mono + wx * wy * dmono
            grads[i, :, 1] = wx * (-2.0 * y) * mono
        else:
            grads[i, :, 0] = (-2.0 * x) * wy * mono
            grads[i, :, 1] = wx * (-2.0 * y) * mono + wx * wy * dmono
    return values, grads


def _tabulate_monomials(monomials: np.ndarray, points: np.ndarray):
    x, y = points[:, 0], points[:, 1]
    nloc = monomials.shape[0]
    n = points.shape[0]
    values = np.empty((nloc, n))
    grads = np.empty((nloc, n, 2))
    for idx, (a, b) in enumerate(monomials):
        values[idx] = x**a * y**b
        grads[idx, :, 0] = a * x ** (a - 1) * y**b if a > 0 else 0.0
        grads[idx, :, 1] = b * x**a * y ** (b - 1) if b > 0 else 0.0
    return values, grads


def reference_element(family: str, r: int) -> ReferenceElement:
    """Reference element of the given family and velocity order r."""
    if family == Q_FAMILY:
        if r < 1:
            raise ValueError(f"Q family needs r >= 1, got {r}")
        nodes_1d = np.linspace(-1.0, 1.0, r + 1)
        nx, ny = np.meshgrid(nodes_1d, nodes_1d, indexing="xy")
        nodes = np.column_stack([nx.ravel(), ny.ravel()])
        return ReferenceElement(family, r, (r + 1) ** 2, nodes, None)
    if family == Q_BUBBLE_FAMILY:
        if r < 2:
            raise ValueError(f"bubble enrichment needs r >= 2, got {r}")
        base = reference_element(Q_FAMILY, r)
        return ReferenceElement(family, r, base.local_dim + 2, base.nodes, None)
    if family == P_DISC_FAMILY:
        if r < 2:
            raise ValueError(f"discontinuous pressure pairing needs r >= 2, got {r}")
        monomials = np.array(
            [(a, d - a) for d in range(r) for a in range(d, -1, -1)], dtype=int
        )
        return ReferenceElement(family, r, r * (r + 1) // 2, None, monomials)
    raise ValueError(f"unknown element family {family!r}")


def evaluate_basis(element: ReferenceElement, xhat) -> tuple[np.ndarray, np.ndarray]:
    """Basis values and reference gradients at points xhat in [-1,1]^2."""
    return element.tabulate(xhat)


@dataclass(frozen=True)
class VelocitySpace:
    """Scalar dof layout of the (possibly enriched) continuous velocity space.

    Both velocity components share this map; vector dofs interleave as
    2*scalar_dof + component.  Grid dofs come first (row-major over the
    (r*n+1)^2 nodal lattice), bubble dofs follow two per cell.
    """

    mesh: Mesh
    element: ReferenceElement
    r: int
    enriched: bool
    cell_dofs: np.ndarray       # (n_cells, local_dim) scalar dof ids
    n_scalar: int
    n_grid: int
    boundary_dofs: np.ndarray   # scalar dof ids with defining node on the boundary
    dof_coords: np.ndarray      # (n_grid, 2) lattice node coordinates

    @property
    def n_vector(self) -> int:
        return 2 * self.n_scalar


@dataclass(frozen=True)
class PressureSpace:
    """Cell-local blocks of the discontinuous pressure space."""

    mesh: Mesh
    element: ReferenceElement
    cell_dofs: np.ndarray  # (n_cells, local_dim)
    n_dofs: int


def build_spaces(mesh: Mesh, r: int, enriched: bool = True):
    """Velocity/pressure pair (Q_r or Q_r^bubble, discontinuous P_{r-1})."""
    if r < 2:
        raise ValueError(f"the mixed pair needs r >= 2, got {r}")
    n = mesh.cells_per_side
    family = Q_BUBBLE_FAMILY if enriched else Q_FAMILY
    velem = reference_element(family, r)

    nodes_per_side = r * n + 1
    n_grid = nodes_per_side**2
    coords_1d = np.linspace(0.0, 1.0, nodes_per_side)
    gx, gy = np.meshgrid(coords_1d, coords_1d, indexing="xy")
    dof_coords = np.column_stack([gx.ravel(), gy.ravel()])

    n_cells = mesh.n_cells
    cell_dofs = np.empty((n_cells, velem.local_dim), dtype=np.int64)
    local_grid = [(a, b) for b in range(r + 1) for a in range(r + 1)]
    for cell in range(n_cells):
        cx, cy = cell % n, cell // n
        for loc, (a, b) in enumerate(local_grid):
            cell_dofs[cell, loc] = (cy * r + b) * nodes_per_side + (cx * r + a)
        if enriched:
            cell_dofs[cell, (r + 1) ** 2 :] = n_grid + 2 * cell + np.arange(2)

    n_scalar = n_grid + (2 * n_cells if enriched else 0)
    ij = np.arange(n_grid)
    ix, iy = ij % nodes_per_side, ij // nodes_per_side
    on_boundary = (ix == 0) | (ix == nodes_per_side - 1) | (iy == 0) | (iy == nodes_per_side - 1)
    boundary_dofs = ij[on_boundary]

    vspace = VelocitySpace(
        mesh=mesh,
        element=velem,
        r=r,
        enriched=enriched,
        cell_dofs=cell_dofs,
        n_scalar=n_scalar,
        n_grid=n_grid,
        boundary_dofs=boundary_dofs,
        dof_coords=dof_coords,
    )

    pelem = reference_element(P_DISC_FAMILY, r)
    pcell_dofs = np.arange(n_cells * pelem.local_dim, dtype=np.int64).reshape(
        n_cells, pelem.local_dim
    )
    pspace = PressureSpace(mesh=mesh, element=pelem, cell_dofs=pcell_dofs, n_dofs=pcell_dofs.size)
    return vspace, pspace


def dirichlet_values(space: VelocitySpace, g, t: float):
    """Boundary dof values by nodal interpolation of g at time t.

    `g(t, points)` must return an (n, 2) array.  Returns (scalar dof ids,
    values) with values of shape (n_boundary, 2).  Bubble dofs are never
    constrained; they vanish on every cell boundary.
    """
    dofs = space.boundary_dofs
    values = np.asarray(g(t, space.dof_coords[dofs]), dtype=float)
    return dofs, values
