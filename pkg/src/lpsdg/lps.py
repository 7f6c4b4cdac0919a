"""Local projection stabilization: cellwise fluctuation operator and its matrix.

The projection space D(K) = P_{r-1}(K) is defined in reference coordinates,
and every cell of the uniform mesh is congruent, so a single reference-cell
projector serves all cells: the Jacobian factor cancels between the Gram
matrix and the moment vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .elements import P_DISC_FAMILY, ReferenceElement, VelocitySpace, reference_element
from .quadrature import TensorQuadrature


@dataclass(frozen=True)
class LocalProjector:
    """L^2 projection onto D(K) expressed on quadrature point values.

    `projection[q, q']` maps values at the reference quadrature points to the
    values of the projected polynomial at the same points; `fluctuation` is
    identity minus projection.
    """

    element: ReferenceElement
    gram: np.ndarray         # (dim D, dim D)
    projection: np.ndarray   # (nq, nq)
    fluctuation: np.ndarray  # (nq, nq)
    quad: TensorQuadrature

    def project_values(self, values: np.ndarray) -> np.ndarray:
        """Apply the projection to point values laid out along the last axis."""
        return values @ self.projection.T

    def fluctuate_values(self, values: np.ndarray) -> np.ndarray:
        return values @ self.fluctuation.T


@dataclass(frozen=True)
class StabParams:
    """Constant stabilization weight; mu = 0 disables the stabilization."""

    mu: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"stabilization weight must be non-negative, got {self.mu}")


def local_projector(element: ReferenceElement, quad: TensorQuadrature) -> LocalProjector:
    """Reference-cell projector onto the span of `element` (a P_disc element).

    The quadrature must be exact for degree 2(r-1); with the package-wide
    r+2 point Gauss rule this always holds.
    """
    if element.family != P_DISC_FAMILY:
        raise ValueError("projection space must be a discontinuous P element")
    basis, _ = element.tabulate(quad.points)          # (dim, nq)
    weighted = basis * quad.weights[None, :]
    gram = weighted @ basis.T
    # P_{r-1} on the square has a well-conditioned Gram matrix; a singular one
    # indicates a broken basis, not a data error
    assert np.linalg.cond(gram) < 1e12, "singular Gram matrix in local projector"
    projection = basis.T @ np.linalg.solve(gram, weighted)
    fluctuation = np.eye(quad.n_points) - projection
    return LocalProjector(
        element=element,
        gram=gram,
        projection=projection,
        fluctuation=fluctuation,
        quad=quad,
    )


def projector_for_order(r: int, quad: TensorQuadrature) -> LocalProjector:
    return local_projector(reference_element(P_DISC_FAMILY, r), quad)


def scalar_stabilization_block(
    space: VelocitySpace, projector: LocalProjector, params: StabParams
) -> np.ndarray:
    """Shared per-cell stabilization block for one velocity component.

    S[a, b] = mu * sum_d (kappa d_d phi_a, kappa d_d phi_b)_K.  The physical
    gradient factor (2/e)^2 cancels against the cell measure (e/2)^2, so the
    block is identical on every cell and purely reference-based.
    """
    quad = projector.quad
    _, grads = space.element.tabulate(quad.points)  # (nloc, nq, 2), reference
    block = np.zeros((space.element.local_dim, space.element.local_dim))
    for d in range(2):
        fluct = projector.fluctuate_values(grads[:, :, d])
        block += (fluct * quad.weights[None, :]) @ fluct.T
    return params.mu * block


def assemble_stabilization(
    space: VelocitySpace, projector: LocalProjector, params: StabParams
) -> sp.csr_matrix:
    """Global stabilization matrix on vector-valued velocity dofs.

    v^T S w = sum_K mu (kappa grad v_h, kappa grad w_h)_K with the fluctuation
    applied to all four gradient components; symmetric positive semidefinite
    and cell-local.
    """
    block = scalar_stabilization_block(space, projector, params)
    nloc = block.shape[0]
    dofs = space.cell_dofs
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    data = np.tile(block.ravel(), space.mesh.n_cells)
    scalar = sp.coo_matrix((data, (rows, cols)), shape=(space.n_scalar, space.n_scalar))
    return sp.kron(scalar.tocsr(), sp.eye(2, format="csr"), format="csr")
