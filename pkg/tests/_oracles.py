"""Independent reference implementations shared by the test modules."""

import numpy as np
import scipy.sparse as sp

from lpsdg import linear_solve
from lpsdg.assembly import assemble_load, convection_residual_and_jacobian
from lpsdg.elements import dirichlet_values


def backward_euler_step(problem, u0, tau, t1):
    """One implicit-Euler step coded independently of the slab solver.

    Shares only the assembled operators:
    (M + tau (A + S)) U + tau (n(U,U,.) - B^T P) = M U0 + tau F(t1), B U = 0.
    """
    ops, ctx = problem.operators, problem.ctx
    nv, npr = ctx.n_velocity, ctx.n_pressure
    bdofs = problem.vspace.boundary_dofs
    bc_rows = np.sort(np.concatenate([2 * bdofs, 2 * bdofs + 1]))

    load = assemble_load(ctx, problem.case.forcing, t1)
    _, bvals = dirichlet_values(problem.vspace, problem.case.velocity, t1)
    bc_full = np.zeros(nv)
    bc_full[2 * bdofs] = bvals[:, 0]
    bc_full[2 * bdofs + 1] = bvals[:, 1]

    mask = np.ones(nv)
    mask[bc_rows] = 0.0
    d = sp.diags(mask)
    ident = sp.coo_matrix((np.ones(len(bc_rows)), (bc_rows, bc_rows)), shape=(nv, nv))
    gauge = sp.csr_matrix(ops.pressure_mean.reshape(-1, 1))

    def residual(x):
        u, p, lam = x[:nv], x[nv : nv + npr], x[-1]
        conv = convection_residual_and_jacobian(ctx, u)[0]
        r_u = (
            ops.mass @ (u - u0)
            + tau * (ops.viscous @ u + ops.stabilization @ u + conv - ops.divergence.T @ p)
            - tau * load
        )
        r_u[bc_rows] = u[bc_rows] - bc_full[bc_rows]
        return np.concatenate(
            [r_u, tau * (ops.divergence @ u) + ops.pressure_mean * lam, [ops.pressure_mean @ p]]
        )

    x = np.concatenate([u0, np.zeros(npr + 1)])
    for _ in range(20):
        r = residual(x)
        if np.linalg.norm(r) < 1e-12:
            break
        dn = convection_residual_and_jacobian(ctx, x[:nv])[1]
        j_vv = d @ (ops.mass + tau * (ops.viscous + ops.stabilization + dn)) + ident
        jac = sp.bmat(
            [
                [j_vv, -tau * (d @ ops.divergence.T), None],
                [tau * ops.divergence, None, gauge],
                [None, gauge.T, None],
            ],
            format="csr",
        )
        x = x + linear_solve(jac, -r)
    return x[:nv]
