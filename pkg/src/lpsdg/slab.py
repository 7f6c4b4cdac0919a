"""Slab-by-slab time stepping of the fully discrete scheme.

Each slab solves the coupled (k+1)-stage nonlinear system monolithically with
an exact-Jacobian Newton iteration; slabs communicate only through the
left-sided limit of the velocity.  A degree-(k+1) temporal interpolant through
the left limit and the stage values provides the post-processed solution.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .assembly import (
    FormContext,
    OperatorSet,
    StageSystem,
    assemble_load,
    build_operators,
    make_context,
)
from .elements import dirichlet_values, build_spaces
from .lps import StabParams, projector_for_order
from .mesh import build_uniform_mesh
from .quadrature import tensor_gauss
from .temporal import (
    RadauRule,
    SlabCoefficients,
    TimePartition,
    gauss_radau,
    lagrange_values,
    map_to_slab,
    slab_coefficients,
)


class StepFailure(RuntimeError):
    """Newton failed to converge on a slab."""

    def __init__(self, slab_index: int, residual: float, message: str = ""):
        self.slab_index = slab_index
        self.residual = residual
        detail = message or (
            f"slab {slab_index}: Newton did not converge, final residual {residual:.3e}"
        )
        super().__init__(detail)


@dataclass(frozen=True)
class NewtonConfig:
    """Newton controls; convergence is relative to the first slab residual.

    With `reuse_jacobian` the last factorization is kept across steps and
    slabs and refreshed once the residual reduction stalls; the converged
    solution is unchanged (same tolerance), only the linearization path
    differs.  Exact Newton (the default) refactors every step and converges
    quadratically.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    max_iter: int = 20
    reuse_jacobian: bool = False

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0 or self.max_iter < 1:
            raise ValueError("Newton tolerances must be positive, max_iter >= 1")


@dataclass
class SlabState:
    """Converged stage coefficients of one slab."""

    index: int
    times: np.ndarray         # (k+1,) stage times
    velocities: np.ndarray    # (k+1, n_velocity)
    pressures: np.ndarray     # (k+1, n_pressure)
    multipliers: np.ndarray   # (k+1,) gauge multipliers
    newton_residuals: list[float] = field(default_factory=list)

    @property
    def end_velocity(self) -> np.ndarray:
        """Left-sided limit at the right end of the slab (last Radau stage)."""
        return self.velocities[-1]


@dataclass
class TrajectoryRecord:
    partition: TimePartition
    rule: RadauRule
    coeffs: SlabCoefficients
    initial: np.ndarray
    slabs: list[SlabState]

    def left_limit(self, n: int) -> np.ndarray:
        """Velocity coefficients at t_n^- (n = 0 gives the initial field)."""
        return self.initial if n == 0 else self.slabs[n - 1].end_velocity

    def write_stage_dump(self, path) -> None:
        """One CSV record per stage: slab, stage, time, coefficient checksum."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("slab,stage,time,checksum\n")
            for state in self.slabs:
                for i, t in enumerate(state.times):
                    digest = hashlib.sha256()
                    digest.update(np.ascontiguousarray(state.velocities[i]).tobytes())
                    digest.update(np.ascontiguousarray(state.pressures[i]).tobytes())
                    fh.write(
                        f"{state.index},{i + 1},{t:.16e},{digest.hexdigest()[:16]}\n"
                    )


@dataclass(frozen=True)
class Problem:
    """Bundle of one spatial/temporal discretization applied to one case."""

    case: object
    mesh: object
    vspace: object
    pspace: object
    ctx: FormContext
    operators: OperatorSet
    params: StabParams
    projector: object
    rule: RadauRule
    coeffs: SlabCoefficients
    newton: NewtonConfig
    k: int
    r: int
    enriched: bool

    @property
    def nu(self) -> float:
        return self.case.nu

    @property
    def mu(self) -> float:
        return self.params.mu


def build_problem(
    case,
    level: int,
    k: int,
    r: int,
    enriched: bool = True,
    mu: float = 0.1,
    newton: NewtonConfig | None = None,
) -> Problem:
    mesh = build_uniform_mesh(level)
    vspace, pspace = build_spaces(mesh, r, enriched)
    quad = tensor_gauss(r + 2)
    ctx = make_context(vspace, pspace, quad)
    params = StabParams(mu)
    projector = projector_for_order(r, quad)
    operators = build_operators(ctx, case.nu, projector, params)
    rule = gauss_radau(k)
    return Problem(
        case=case,
        mesh=mesh,
        vspace=vspace,
        pspace=pspace,
        ctx=ctx,
        operators=operators,
        params=params,
        projector=projector,
        rule=rule,
        coeffs=slab_coefficients(rule),
        newton=newton or NewtonConfig(),
        k=k,
        r=r,
        enriched=enriched,
    )


def initial_velocity(ctx: FormContext, u0) -> np.ndarray:
    """Interpolate u0: lattice dofs by point values, bubbles by local L2 fit.

    `u0(pts)` must return an (n, 2) array.  Fields in the span of the lattice
    basis are reproduced exactly (the bubble fit then sees a zero residual).
    """
    vs = ctx.vspace
    coeffs = np.zeros((vs.n_scalar, 2))
    coeffs[: vs.n_grid] = np.asarray(u0(vs.dof_coords), dtype=float)
    if vs.enriched:
        flat = coeffs.ravel()
        vals, _ = kernels.field_at_quadrature(flat, vs.cell_dofs, ctx.phi, ctx.gphi)
        n_cells, nq, _ = ctx.phys_points.shape
        exact = np.asarray(u0(ctx.phys_points.reshape(-1, 2)), dtype=float)
        resid = exact.reshape(n_cells, nq, 2) - vals
        bubbles = ctx.phi[-2:]  # (2, nq); the Jacobian cancels in the fit
        gram = (bubbles * ctx.quad.weights[None, :]) @ bubbles.T
        moments = np.einsum("cqi,bq,q->cbi", resid, bubbles, ctx.quad.weights)
        coeffs[vs.n_grid :] = np.linalg.solve(gram, moments).reshape(-1, 2)
    return coeffs.ravel()


def _boundary_vector(problem: Problem, system: StageSystem, t: float) -> np.ndarray:
    dofs, values = dirichlet_values(problem.vspace, problem.case.velocity, t)
    full = np.zeros(problem.ctx.n_velocity)
    full[2 * dofs] = values[:, 0]
    full[2 * dofs + 1] = values[:, 1]
    return full[system.bc_vec_dofs]


def solve_slab(
    problem: Problem,
    u_prev: np.ndarray,
    t_prev: float,
    tau: float,
    system: StageSystem | None = None,
    index: int = 1,
) -> SlabState:
    """Newton-solve the stage system of the slab (t_prev, t_prev + tau]."""
    if system is None:
        system = StageSystem(problem.operators, problem.coeffs, tau)
    cfg = problem.newton
    stage_times, _ = map_to_slab(problem.rule, t_prev, tau)
    loads = np.stack(
        [assemble_load(problem.ctx, problem.case.forcing, t) for t in stage_times]
    )
    bc_values = np.stack([_boundary_vector(problem, system, t) for t in stage_times])

    x = np.zeros(system.n_dofs)
    for i in range(system.n_stages):
        x[i * system.stage_dim : i * system.stage_dim + system.nv] = u_prev

    history: list[float] = []
    tol = None
    for _ in range(cfg.max_iter + 1):
        residual = system.residual(x, u_prev, loads, bc_values)
        rnorm = float(np.linalg.norm(residual))
        history.append(rnorm)
        if tol is None:
            tol = max(cfg.rtol * rnorm, cfg.atol)
        if rnorm <= tol:
            velocities, pressures, lams = system.split(x)
            return SlabState(
                index=index,
                times=stage_times,
                velocities=velocities.copy(),
                pressures=pressures.copy(),
                multipliers=lams.copy(),
                newton_residuals=history,
            )
        if len(history) > cfg.max_iter:
            break
        lu = system.cached_factorization
        stalling = len(history) >= 2 and rnorm > 0.25 * history[-2]
        if lu is None or not cfg.reuse_jacobian or stalling:
            lu = system.factorize(x)
        x = x + lu.solve(-residual)
    raise StepFailure(index, history[-1])


def advance(problem: Problem, partition: TimePartition, dump_path=None) -> TrajectoryRecord:
    """March the scheme over the whole partition, slab by slab."""
    u_prev = initial_velocity(problem.ctx, problem.case.initial_velocity)
    record = TrajectoryRecord(
        partition=partition,
        rule=problem.rule,
        coeffs=problem.coeffs,
        initial=u_prev,
        slabs=[],
    )
    system = None
    for n in range(partition.n_slabs):
        t_prev = float(partition.times[n])
        tau = float(partition.times[n + 1] - partition.times[n])
        if system is None or abs(tau - system.tau) > 1e-12 * system.tau:
            system = StageSystem(problem.operators, problem.coeffs, tau)
        state = solve_slab(problem, u_prev, t_prev, tau, system=system, index=n + 1)
        record.slabs.append(state)
        u_prev = state.end_velocity
    if dump_path is not None:
        record.write_stage_dump(dump_path)
    return record


@dataclass
class PostprocessedTrajectory:
    """Piecewise degree-(k+1) velocity interpolant, continuous in time.

    On each slab it interpolates the left limit at the slab start and all
    Radau stage values; continuity is automatic because the last stage of a
    slab is the left limit consumed by the next.
    """

    partition: TimePartition
    nodes: list[np.ndarray]   # per slab: (k+2,) interpolation times
    stacks: list[np.ndarray]  # per slab: (k+2, n_velocity) coefficients

    def evaluate(self, slab_index: int, times) -> np.ndarray:
        basis = lagrange_values(self.nodes[slab_index], times)
        return basis @ self.stacks[slab_index]


def postprocess(trajectory: TrajectoryRecord) -> PostprocessedTrajectory:
    nodes, stacks = [], []
    left_value = trajectory.initial
    for n, state in enumerate(trajectory.slabs):
        nodes.append(np.concatenate([[trajectory.partition.times[n]], state.times]))
        stacks.append(np.vstack([left_value[None, :], state.velocities]))
        left_value = state.end_velocity
    return PostprocessedTrajectory(trajectory.partition, nodes, stacks)
