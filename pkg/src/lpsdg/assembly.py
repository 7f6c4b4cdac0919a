"""Sparse assembly of all weak forms and the coupled slab stage system.

All cells of the uniform mesh are congruent, so the mass, viscous,
divergence, and stabilization local blocks are computed once on the
reference cell and scattered with tiled data.  Only the convection terms
(velocity dependent) and load vectors are reassembled per call; those per-cell
loops live in `kernels` with numba and numpy paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .elements import PressureSpace, VelocitySpace
from .lps import LocalProjector, StabParams, assemble_stabilization
from .ordering import stage_system_permutation
from .quadrature import TensorQuadrature
from .temporal import SlabCoefficients


class SolverFailure(RuntimeError):
    """Raised when the sparse direct solve cannot produce a usable solution."""


@dataclass(frozen=True)
class FormContext:
    """Reference tabulations and scatter indices shared by every form."""

    vspace: VelocitySpace
    pspace: PressureSpace
    quad: TensorQuadrature
    phi: np.ndarray          # (nloc, nq) velocity basis values
    gphi: np.ndarray         # (nloc, nq, 2) physical velocity gradients
    psi: np.ndarray          # (npl, nq) pressure basis values
    wdet: np.ndarray         # (nq,) weights * |det J|
    phys_points: np.ndarray  # (n_cells, nq, 2)
    vec_dofs: np.ndarray     # (n_cells, 2*nloc) interleaved vector dof ids

    @property
    def n_velocity(self) -> int:
        return self.vspace.n_vector

    @property
    def n_pressure(self) -> int:
        return self.pspace.n_dofs


def make_context(vspace: VelocitySpace, pspace: PressureSpace, quad: TensorQuadrature) -> FormContext:
    edge = vspace.mesh.edge_length
    det_j = (edge / 2.0) ** 2
    phi, gref = vspace.element.tabulate(quad.points)
    gphi = gref * (2.0 / edge)
    psi, _ = pspace.element.tabulate(quad.points)
    wdet = quad.weights * det_j

    centers = vspace.mesh.cell_centers()
    phys_points = centers[:, None, :] + (edge / 2.0) * quad.points[None, :, :]

    cd = vspace.cell_dofs
    vec_dofs = np.empty((cd.shape[0], 2 * cd.shape[1]), dtype=np.int64)
    vec_dofs[:, 0::2] = 2 * cd
    vec_dofs[:, 1::2] = 2 * cd + 1

    return FormContext(
        vspace=vspace,
        pspace=pspace,
        quad=quad,
        phi=phi,
        gphi=gphi,
        psi=psi,
        wdet=wdet,
        phys_points=phys_points,
        vec_dofs=vec_dofs,
    )


def _scatter_scalar_blocks(ctx: FormContext, block: np.ndarray) -> sp.csr_matrix:
    """Sum one identical (nloc, nloc) block into the global scalar matrix."""
    dofs = ctx.vspace.cell_dofs
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    data = np.tile(block.ravel(), dofs.shape[0])
    n = ctx.vspace.n_scalar
    return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def _expand_to_vector(scalar: sp.csr_matrix) -> sp.csr_matrix:
    """Component-diagonal expansion matching the interleaved vector layout."""
    return sp.kron(scalar, sp.eye(2, format="csr"), format="csr")


def assemble_mass(ctx: FormContext) -> sp.csr_matrix:
    """Vector mass matrix: v^T M w = (v_h, w_h) over Omega."""
    block = (ctx.phi * ctx.wdet[None, :]) @ ctx.phi.T
    return _expand_to_vector(_scatter_scalar_blocks(ctx, block))


def assemble_stokes(ctx: FormContext, nu: float):
    """Viscous block and divergence coupling of the mixed form.

    Returns (A_visc, B) with v^T A_visc w = nu (grad v, grad w) and
    (B v)[q] = (q_h, div v_h).  The full saddle form applies them with the
    sign pattern -(q, div w) + (r, div v).
    """
    stiff = np.zeros((ctx.phi.shape[0],) * 2)
    for d in range(2):
        gd = ctx.gphi[:, :, d]
        stiff += (gd * ctx.wdet[None, :]) @ gd.T
    a_visc = _expand_to_vector(_scatter_scalar_blocks(ctx, nu * stiff))

    nloc = ctx.phi.shape[0]
    npl = ctx.psi.shape[0]
    bloc = np.zeros((npl, 2 * nloc))
    for d in range(2):
        bloc[:, d::2] = (ctx.psi * ctx.wdet[None, :]) @ ctx.gphi[:, :, d].T
    pdofs = ctx.pspace.cell_dofs
    rows = np.repeat(pdofs, 2 * nloc, axis=1).ravel()
    cols = np.tile(ctx.vec_dofs, (1, npl)).ravel()
    data = np.tile(bloc.ravel(), pdofs.shape[0])
    b = sp.coo_matrix((data, (rows, cols)), shape=(ctx.n_pressure, ctx.n_velocity)).tocsr()
    return a_visc, b


def pressure_mean_vector(ctx: FormContext) -> np.ndarray:
    """g with g . p = integral of p_h over Omega (the gauge functional)."""
    local = ctx.psi @ ctx.wdet
    out = np.zeros(ctx.n_pressure)
    np.add.at(out, ctx.pspace.cell_dofs.ravel(), np.tile(local, ctx.pspace.cell_dofs.shape[0]))
    return out


def assemble_load(ctx: FormContext, f, t: float) -> np.ndarray:
    """Load vector of f(t) against the vector velocity basis."""
    n_cells, nq, _ = ctx.phys_points.shape
    fv = np.asarray(f(t, ctx.phys_points.reshape(-1, 2)), dtype=float).reshape(n_cells, nq, 2)
    local = np.einsum("cqi,aq,q->cai", fv, ctx.phi, ctx.wdet)
    out = np.zeros((ctx.vspace.n_scalar, 2))
    np.add.at(out, ctx.vspace.cell_dofs, local)
    return out.ravel()


def _convection_local(ctx: FormContext, u: np.ndarray):
    cd = ctx.vspace.cell_dofs
    u_vals, u_grads = kernels.field_at_quadrature(u, cd, ctx.phi, ctx.gphi)
    return kernels.convection_cell_terms(u_vals, u_grads, ctx.phi, ctx.gphi, ctx.wdet)


def _scatter_convection_residual(ctx: FormContext, res_loc: np.ndarray) -> np.ndarray:
    residual = np.zeros((ctx.vspace.n_scalar, 2))
    np.add.at(residual, ctx.vspace.cell_dofs, res_loc)
    return residual.ravel()


def _scatter_convection_matrices(ctx: FormContext, cmat, gmat):
    cd = ctx.vspace.cell_dofs
    n_scalar = ctx.vspace.n_scalar
    nloc = cd.shape[1]
    rows = np.repeat(cd, nloc, axis=1).ravel()
    cols = np.tile(cd, (1, nloc)).ravel()
    skew_scalar = sp.coo_matrix((cmat.ravel(), (rows, cols)), shape=(n_scalar, n_scalar))
    skew = _expand_to_vector(skew_scalar.tocsr())

    # transport-derivative block with full 2x2 component coupling
    block = gmat.transpose(0, 3, 1, 4, 2).reshape(cd.shape[0], 2 * nloc, 2 * nloc)
    vrows = np.repeat(ctx.vec_dofs, 2 * nloc, axis=1).ravel()
    vcols = np.tile(ctx.vec_dofs, (1, 2 * nloc)).ravel()
    nvec = ctx.n_velocity
    grad_term = sp.coo_matrix((block.ravel(), (vrows, vcols)), shape=(nvec, nvec)).tocsr()
    return skew, grad_term


def convection_residual(ctx: FormContext, u: np.ndarray) -> np.ndarray:
    """Residual vector of the skew trilinear form, component a = n(u, u, phi_a)."""
    res_loc, _, _ = _convection_local(ctx, u)
    return _scatter_convection_residual(ctx, res_loc)


def assemble_convection(ctx: FormContext, u: np.ndarray):
    """Skew convection matrix N(u) and the residual vector n(u, u, .).

    w^T N(u) v = 0.5 [((u . grad) v, w) - ((u . grad) w, v)] under the fixed
    quadrature; v^T N(u) v vanishes identically because the quadrature treats
    the two slots symmetrically.
    """
    res_loc, cmat, gmat = _convection_local(ctx, u)
    skew, _ = _scatter_convection_matrices(ctx, cmat, gmat)
    return skew, _scatter_convection_residual(ctx, res_loc)


def convection_jacobian(ctx: FormContext, u: np.ndarray) -> sp.csr_matrix:
    """Derivative of u -> n(u, u, .) at u: dN(u) d = N(u) d + n(d, u, .)."""
    _, cmat, gmat = _convection_local(ctx, u)
    skew, grad_term = _scatter_convection_matrices(ctx, cmat, gmat)
    return (skew + grad_term).tocsr()


def convection_residual_and_jacobian(ctx: FormContext, u: np.ndarray):
    res_loc, cmat, gmat = _convection_local(ctx, u)
    skew, grad_term = _scatter_convection_matrices(ctx, cmat, gmat)
    return _scatter_convection_residual(ctx, res_loc), (skew + grad_term).tocsr()


def _check_solution(matrix, x, rhs):
    if not np.all(np.isfinite(x)):
        raise SolverFailure("sparse solve produced non-finite entries")
    residual = np.linalg.norm(matrix @ x - rhs)
    bound = 1e-10 * (np.linalg.norm(rhs) + 1.0)
    if residual > bound:
        raise SolverFailure(f"direct solve residual {residual:.3e} exceeds {bound:.3e}")


def _factorize(matrix: sp.csc_matrix, permc_spec: str):
    try:
        return spla.splu(matrix, permc_spec=permc_spec)
    except RuntimeError as exc:  # SuperLU reports the zero pivot in its message
        raise SolverFailure(f"sparse factorization failed: {exc}") from exc


def linear_solve(matrix: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Direct sparse solve with a residual guarantee of 1e-10 (|b| + 1)."""
    lu = _factorize(matrix.tocsc(), "COLAMD")
    x = lu.solve(rhs)
    _check_solution(matrix, x, rhs)
    return x


class PermutedFactorization:
    """LU of a symmetrically permuted matrix, solving in original ordering.

    A precomputed fill-reducing permutation (nested dissection on structured
    meshes) beats SuperLU's own column ordering by a wide margin here, and a
    cached factorization can serve several Newton steps.
    """

    def __init__(self, matrix: sp.spmatrix, perm: np.ndarray):
        self.matrix = matrix.tocsr()
        self.perm = perm
        permuted = self.matrix[perm][:, perm].tocsc()
        self._lu = _factorize(permuted, "NATURAL")
        self._inverse_perm = np.empty_like(perm)
        self._inverse_perm[perm] = np.arange(len(perm))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs[self.perm])[self._inverse_perm]


@dataclass(frozen=True)
class OperatorSet:
    """Assembled time-independent operators of one spatial discretization."""

    ctx: FormContext
    mass: sp.csr_matrix
    viscous: sp.csr_matrix
    stabilization: sp.csr_matrix
    divergence: sp.csr_matrix
    pressure_mean: np.ndarray


def build_operators(
    ctx: FormContext, nu: float, projector: LocalProjector, params: StabParams
) -> OperatorSet:
    a_visc, b = assemble_stokes(ctx, nu)
    s = assemble_stabilization(ctx.vspace, projector, params)
    return OperatorSet(
        ctx=ctx,
        mass=assemble_mass(ctx),
        viscous=a_visc,
        stabilization=s,
        divergence=b,
        pressure_mean=pressure_mean_vector(ctx),
    )


class StageSystem:
    """Nonlinear algebraic system coupling the k+1 stages of one slab.

    Unknown layout per stage: velocity coefficients, pressure coefficients,
    one gauge multiplier enforcing a mean-zero pressure.  Stages couple only
    through the temporal mass blocks alpha[i, j] * M; every other block is
    stage diagonal.  Dirichlet rows are replaced by identity rows; the same
    instance is reused for every slab of a uniform partition.
    """

    def __init__(self, ops: OperatorSet, coeffs: SlabCoefficients, tau: float):
        if tau <= 0:
            raise ValueError(f"slab length must be positive, got {tau}")
        self.ops = ops
        self.coeffs = coeffs
        self.tau = tau
        self.n_stages = len(coeffs.beta)
        ctx = ops.ctx
        self.nv = ctx.n_velocity
        self.npr = ctx.n_pressure
        self.stage_dim = self.nv + self.npr + 1
        self.n_dofs = self.n_stages * self.stage_dim

        bdofs = ctx.vspace.boundary_dofs
        self.bc_vec_dofs = np.sort(np.concatenate([2 * bdofs, 2 * bdofs + 1]))

        vmask = np.ones(self.nv)
        vmask[self.bc_vec_dofs] = 0.0
        self._vel_mask = sp.diags(vmask, format="csr")
        self._constant_jacobian = self._build_constant_jacobian()
        self._perm = stage_system_permutation(ctx.vspace, ctx.pspace, self.n_stages)
        self._cached_lu: PermutedFactorization | None = None

    # -- structure -----------------------------------------------------------

    def _build_constant_jacobian(self) -> sp.csr_matrix:
        ops, tau = self.ops, self.tau
        half_tau = 0.5 * tau
        stage_visc = self._vel_mask @ (half_tau * (ops.viscous + ops.stabilization))
        div = half_tau * ops.divergence
        div_t = -self._vel_mask @ div.T.tocsr()
        gauge_col = sp.csr_matrix(ops.pressure_mean.reshape(-1, 1))
        gauge_row = sp.csr_matrix(ops.pressure_mean.reshape(1, -1))

        k1 = self.n_stages
        blocks = [[None] * (3 * k1) for _ in range(3 * k1)]
        for i in range(k1):
            for j in range(k1):
                vel_block = self.coeffs.alpha[i, j] * (self._vel_mask @ ops.mass)
                if i == j:
                    vel_block = vel_block + stage_visc
                blocks[3 * i][3 * j] = vel_block
            blocks[3 * i][3 * i + 1] = div_t
            blocks[3 * i + 1][3 * i] = div
            blocks[3 * i + 1][3 * i + 2] = gauge_col
            blocks[3 * i + 2][3 * i + 1] = gauge_row
        jac = sp.bmat(blocks, format="csr")

        bc_rows = (
            np.arange(self.n_stages)[:, None] * self.stage_dim + self.bc_vec_dofs[None, :]
        ).ravel()
        ident = sp.coo_matrix(
            (np.ones(len(bc_rows)), (bc_rows, bc_rows)), shape=(self.n_dofs,) * 2
        )
        return (jac + ident).tocsr()

    def split(self, x: np.ndarray):
        """Stage-wise views (velocities, pressures, multipliers)."""
        stages = x.reshape(self.n_stages, self.stage_dim)
        return (
            stages[:, : self.nv],
            stages[:, self.nv : self.nv + self.npr],
            stages[:, -1],
        )

    # -- evaluation ----------------------------------------------------------

    def residual(
        self,
        x: np.ndarray,
        u_prev: np.ndarray,
        loads: np.ndarray,
        bc_values: np.ndarray,
    ) -> np.ndarray:
        ops, ctx = self.ops, self.ops.ctx
        half_tau = 0.5 * self.tau
        velocities, pressures, lams = self.split(x)
        mass_prev = ops.mass @ u_prev

        residual = np.zeros(self.n_dofs)
        mass_u = [ops.mass @ velocities[j] for j in range(self.n_stages)]
        for i in range(self.n_stages):
            u_i, p_i = velocities[i], pressures[i]
            conv_res = convection_residual(ctx, u_i)
            r_u = (
                sum(self.coeffs.alpha[i, j] * mass_u[j] for j in range(self.n_stages))
                + half_tau
                * (ops.viscous @ u_i + ops.stabilization @ u_i + conv_res - ops.divergence.T @ p_i)
                - self.coeffs.beta[i] * mass_prev
                - half_tau * loads[i]
            )
            r_u[self.bc_vec_dofs] = u_i[self.bc_vec_dofs] - bc_values[i]
            base = i * self.stage_dim
            residual[base : base + self.nv] = r_u
            residual[base + self.nv : base + self.nv + self.npr] = (
                half_tau * (ops.divergence @ u_i) + ops.pressure_mean * lams[i]
            )
            residual[base + self.nv + self.npr] = ops.pressure_mean @ p_i
        return residual

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        velocities, _, _ = self.split(x)
        blocks = [convection_jacobian(self.ops.ctx, velocities[i]) for i in range(self.n_stages)]
        return self._embed_convection(blocks)

    def factorize(self, x: np.ndarray) -> PermutedFactorization:
        """Factor the Jacobian at x with the nested-dissection ordering; cached."""
        self._cached_lu = PermutedFactorization(self.jacobian(x), self._perm)
        return self._cached_lu

    @property
    def cached_factorization(self) -> PermutedFactorization | None:
        return self._cached_lu

    def _embed_convection(self, stage_jacobians) -> sp.csr_matrix:
        """Full Jacobian: constant part plus stage-diagonal convection blocks."""
        half_tau = 0.5 * self.tau
        rows, cols, data = [], [], []
        for i, block in enumerate(stage_jacobians):
            masked = (self._vel_mask @ block).tocoo()
            offset = i * self.stage_dim
            rows.append(masked.row + offset)
            cols.append(masked.col + offset)
            data.append(half_tau * masked.data)
        conv = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_dofs,) * 2,
        )
        return (self._constant_jacobian + conv).tocsr()


def apply_constraints(matrix: sp.spmatrix, rhs: np.ndarray, rows: np.ndarray, values: np.ndarray):
    """Replace `rows` of an assembled system by identity rows with `values`."""
    mask = np.ones(matrix.shape[0])
    mask[rows] = 0.0
    ident = sp.coo_matrix((np.ones(len(rows)), (rows, rows)), shape=matrix.shape)
    constrained = (sp.diags(mask) @ matrix.tocsr() + ident).tocsr()
    new_rhs = rhs.copy()
    new_rhs[rows] = values
    return constrained, new_rhs
