"""Error measurement for manufactured-solution runs and EOC computation.

Two temporal quadratures are used deliberately.  The composite stabilized
norm is defined through the slab Radau rule, so its components sample the
stage values exactly.  The separately reported L2(L2) errors of velocity and
pressure integrate the piecewise polynomial error with a denser Gauss rule
(k+3 points per slab): sampling only at Radau points would show the
superconvergent stage error instead of the error of the trajectory.
Pressure errors compare mean-shifted exact pressure against the (mean-zero)
discrete pressure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .quadrature import gauss_1d
from .slab import PostprocessedTrajectory, Problem, TrajectoryRecord
from .temporal import lagrange_values


@dataclass(frozen=True)
class ErrorReport:
    """Aggregated error norms of one run; every field is a plain norm value.

    `snorm` is the composite quantity
        sqrt(final^2 + jump^2 + qn_l2l2_velocity^2
             + l2l2_gradient^2 + l2l2_stabilization^2)
    whose parts are Radau-weighted (gradient nu-weighted, stabilization
    mu-weighted); `l2l2_velocity`/`l2l2_pressure` are the densely integrated
    space-time norms.
    """

    l2l2_velocity: float
    qn_l2l2_velocity: float
    l2l2_gradient: float
    l2l2_stabilization: float
    jump: float
    final_velocity: float
    l2l2_pressure: float
    snorm: float
    l2l2_velocity_postprocessed: float | None = None


def _stage_error_squares(problem: Problem, velocity, t: float):
    ctx = problem.ctx
    pts = ctx.phys_points.reshape(-1, 2)
    n_cells, nq, _ = ctx.phys_points.shape
    case = problem.case

    vals, grads = kernels.field_at_quadrature(
        velocity, ctx.vspace.cell_dofs, ctx.phi, ctx.gphi
    )
    e_v = case.velocity(t, pts).reshape(n_cells, nq, 2) - vals
    e_g = case.velocity_gradient(t, pts).reshape(n_cells, nq, 2, 2) - grads

    l2_sq = np.einsum("cqi,cqi,q->", e_v, e_v, ctx.wdet)
    grad_sq = np.einsum("cqid,cqid,q->", e_g, e_g, ctx.wdet)

    fluct = problem.projector.fluctuation
    e_g_f = np.einsum("qp,cpid->cqid", fluct, e_g)
    stab_sq = problem.mu * np.einsum("cqid,cqid,q->", e_g_f, e_g_f, ctx.wdet)
    return l2_sq, grad_sq, stab_sq


def _velocity_field_error_sq(problem: Problem, velocity, t: float) -> float:
    ctx = problem.ctx
    n_cells, nq, _ = ctx.phys_points.shape
    vals, _ = kernels.field_at_quadrature(velocity, ctx.vspace.cell_dofs, ctx.phi, ctx.gphi)
    e_v = problem.case.velocity(t, ctx.phys_points.reshape(-1, 2)).reshape(n_cells, nq, 2) - vals
    return float(np.einsum("cqi,cqi,q->", e_v, e_v, ctx.wdet))


def _pressure_field_error_sq(problem: Problem, pressure, t: float) -> float:
    ctx = problem.ctx
    n_cells, nq, _ = ctx.phys_points.shape
    p_disc = np.einsum("ca,aq->cq", pressure[ctx.pspace.cell_dofs], ctx.psi)
    e_p = (
        problem.case.pressure_zero_mean(t, ctx.phys_points.reshape(-1, 2)).reshape(n_cells, nq)
        - p_disc
    )
    return float(np.einsum("cq,cq,q->", e_p, e_p, ctx.wdet))


def compute_errors(
    problem: Problem,
    trajectory: TrajectoryRecord,
    postprocessed: PostprocessedTrajectory | None = None,
) -> ErrorReport:
    """Accumulate all error norms of a trajectory against the exact solution."""
    nu = problem.nu
    mass = problem.operators.mass
    at_left = trajectory.coeffs.basis_at_left
    rule = trajectory.rule
    tg, wg = gauss_1d(rule.k + 3)

    sum_qn_l2 = sum_grad = sum_stab = sum_jump = 0.0
    sum_l2 = sum_p = 0.0
    for slab_idx, state in enumerate(trajectory.slabs):
        tau = trajectory.partition.times[slab_idx + 1] - trajectory.partition.times[slab_idx]
        qn_weights = 0.5 * tau * rule.weights
        for i, t in enumerate(state.times):
            l2_sq, grad_sq, stab_sq = _stage_error_squares(
                problem, state.velocities[i], float(t)
            )
            sum_qn_l2 += qn_weights[i] * l2_sq
            sum_grad += qn_weights[i] * nu * grad_sq
            sum_stab += qn_weights[i] * stab_sq
        jump = at_left @ state.velocities - trajectory.left_limit(slab_idx)
        sum_jump += float(jump @ (mass @ jump))

        # dense-in-time quadrature of the trajectory polynomials
        times = trajectory.partition.times[slab_idx] + 0.5 * tau * (tg + 1.0)
        basis = lagrange_values(state.times, times)  # (k+3, k+1)
        for w, t, coeffs in zip(0.5 * tau * wg, times, basis):
            vel = coeffs @ state.velocities
            pre = coeffs @ state.pressures
            sum_l2 += w * _velocity_field_error_sq(problem, vel, float(t))
            sum_p += w * _pressure_field_error_sq(problem, pre, float(t))

    final_sq = _velocity_field_error_sq(
        problem, trajectory.slabs[-1].end_velocity, trajectory.partition.final_time
    )

    postproc_norm = None
    if postprocessed is not None:
        total = 0.0
        for slab_idx in range(trajectory.partition.n_slabs):
            t0 = trajectory.partition.times[slab_idx]
            tau = trajectory.partition.times[slab_idx + 1] - t0
            times = t0 + 0.5 * tau * (tg + 1.0)
            coeffs = postprocessed.evaluate(slab_idx, times)
            for w, t, coef in zip(0.5 * tau * wg, times, coeffs):
                total += w * _velocity_field_error_sq(problem, coef, float(t))
        postproc_norm = float(np.sqrt(total))

    snorm = float(np.sqrt(final_sq + sum_jump + sum_qn_l2 + sum_grad + sum_stab))
    return ErrorReport(
        l2l2_velocity=float(np.sqrt(sum_l2)),
        qn_l2l2_velocity=float(np.sqrt(sum_qn_l2)),
        l2l2_gradient=float(np.sqrt(sum_grad)),
        l2l2_stabilization=float(np.sqrt(sum_stab)),
        jump=float(np.sqrt(sum_jump)),
        final_velocity=float(np.sqrt(final_sq)),
        l2l2_pressure=float(np.sqrt(sum_p)),
        snorm=snorm,
        l2l2_velocity_postprocessed=postproc_norm,
    )


@dataclass(frozen=True)
class EOCTable:
    """Errors against a refinement parameter with experimental orders.

    orders[i] relates rows i and i+1:
        log(e_i / e_{i+1}) / log(p_i / p_{i+1});
    undefined entries (a non-positive error) are None.
    """

    params: tuple
    errors: tuple
    orders: tuple

    def rows(self):
        padded = (None,) + self.orders
        return list(zip(self.params, self.errors, padded))


def eoc(errors, params) -> EOCTable:
    errors = [float(e) for e in errors]
    params = [float(p) for p in params]
    if len(errors) != len(params) or len(errors) < 2:
        raise ValueError("need equally long error/parameter lists with >= 2 entries")
    if any(p <= 0 for p in params):
        raise ValueError("refinement parameters must be positive")
    orders = []
    for (e0, p0), (e1, p1) in zip(zip(errors, params), zip(errors[1:], params[1:])):
        if e0 <= 0 or e1 <= 0:
            orders.append(None)
        else:
            orders.append(float(np.log(e0 / e1) / np.log(p0 / p1)))
    return EOCTable(tuple(params), tuple(errors), tuple(orders))
