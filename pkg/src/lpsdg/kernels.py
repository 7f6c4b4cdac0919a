"""Hot per-cell kernels: numba-compiled loops with a pure-numpy fallback.

The numba path is the default; set LPSDG_DISABLE_NUMBA=1 (or install without
numba) to select the vectorized numpy implementations.  Both paths produce
identical results to rounding; `benchmarks/bench_kernels.py` compares them.

Layouts shared by all kernels:
  coeffs      (2 * n_scalar,) interleaved vector field, component fastest
  cell_dofs   (n_cells, nloc) scalar dof ids
  phi         (nloc, nq) basis values at reference quadrature points
  gphi        (nloc, nq, 2) physical basis gradients (same on every cell)
  wdet        (nq,) quadrature weights times the cell Jacobian determinant
"""

from __future__ import annotations

import os

import numpy as np

_env_disable = os.environ.get("LPSDG_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _env_disable in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False


def numba_enabled() -> bool:
    """True when the compiled kernel path is active."""
    return NUMBA_AVAILABLE


# ---------------------------------------------------------------------------
# field evaluation at quadrature points


def _field_at_quadrature_numpy(coeffs, cell_dofs, phi, gphi):
    local = coeffs.reshape(-1, 2)[cell_dofs]              # (nc, nloc, 2)
    values = np.einsum("cai,aq->cqi", local, phi)
    grads = np.einsum("cai,aqd->cqid", local, gphi)
    return values, grads


def _field_at_quadrature_loops(coeffs, cell_dofs, phi, gphi):
    n_cells, nloc = cell_dofs.shape
    nq = phi.shape[1]
    values = np.zeros((n_cells, nq, 2))
    grads = np.zeros((n_cells, nq, 2, 2))
    for c in range(n_cells):
        for a in range(nloc):
            dof = cell_dofs[c, a]
            u0 = coeffs[2 * dof]
            u1 = coeffs[2 * dof + 1]
            for q in range(nq):
                p = phi[a, q]
                values[c, q, 0] += u0 * p
                values[c, q, 1] += u1 * p
                for d in range(2):
                    g = gphi[a, q, d]
                    grads[c, q, 0, d] += u0 * g
                    grads[c, q, 1, d] += u1 * g
    return values, grads


# ---------------------------------------------------------------------------
# convection terms: residual n(u,u,.), skew matrix block, and the extra
# Jacobian block from differentiating the transporting field


def _convection_numpy(u_vals, u_grads, phi, gphi, wdet):
    adv = np.einsum("cqd,bqd->cqb", u_vals, gphi)         # (u . grad) phi_b
    conv_u = np.einsum("cqd,cqid->cqi", u_vals, u_grads)  # (u . grad) u
    res = 0.5 * (
        np.einsum("cqi,aq,q->cai", conv_u, phi, wdet)
        - np.einsum("cqa,cqi,q->cai", adv, u_vals, wdet)
    )
    half = np.einsum("aq,cqb,q->cab", phi, adv, wdet)
    cmat = 0.5 * (half - half.transpose(0, 2, 1))
    gmat = 0.5 * (
        np.einsum("cqij,aq,bq,q->cijab", u_grads, phi, phi, wdet)
        - np.einsum("aqj,cqi,bq,q->cijab", gphi, u_vals, phi, wdet)
    )
    return res, cmat, gmat


def _convection_loops(u_vals, u_grads, phi, gphi, wdet):
    n_cells, nq, _ = u_vals.shape
    nloc = phi.shape[0]
    res = np.zeros((n_cells, nloc, 2))
    cmat = np.zeros((n_cells, nloc, nloc))
    gmat = np.zeros((n_cells, 2, 2, nloc, nloc))
    adv = np.zeros(nloc)
    for c in range(n_cells):
        for q in range(nq):
            w = wdet[q]
            u0 = u_vals[c, q, 0]
            u1 = u_vals[c, q, 1]
            for b in range(nloc):
                adv[b] = u0 * gphi[b, q, 0] + u1 * gphi[b, q, 1]
            conv0 = u0 * u_grads[c, q, 0, 0] + u1 * u_grads[c, q, 0, 1]
            conv1 = u0 * u_grads[c, q, 1, 0] + u1 * u_grads[c, q, 1, 1]
            for a in range(nloc):
                pa = phi[a, q]
                res[c, a, 0] += 0.5 * w * (conv0 * pa - adv[a] * u0)
                res[c, a, 1] += 0.5 * w * (conv1 * pa - adv[a] * u1)
                for b in range(nloc):
                    cmat[c, a, b] += 0.5 * w * (pa * adv[b] - adv[a] * phi[b, q])
            for i in range(2):
                ui = u_vals[c, q, i]
                for j in range(2):
                    gij = u_grads[c, q, i, j]
                    for a in range(nloc):
                        entry = 0.5 * w * (gij * phi[a, q] - gphi[a, q, j] * ui)
                        for b in range(nloc):
                            gmat[c, i, j, a, b] += entry * phi[b, q]
    return res, cmat, gmat


if NUMBA_AVAILABLE:
    _field_at_quadrature_numba = njit(cache=True)(_field_at_quadrature_loops)
    _convection_numba = njit(cache=True)(_convection_loops)

    field_at_quadrature = _field_at_quadrature_numba
    convection_cell_terms = _convection_numba
else:
    field_at_quadrature = _field_at_quadrature_numpy
    convection_cell_terms = _convection_numpy
