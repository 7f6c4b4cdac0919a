"""Geometric nested-dissection ordering for the structured-mesh systems.

Cells couple dofs only within themselves, so any cell-boundary line whose
on-line lattice dofs are removed disconnects the domain.  Recursive bisection
along mesh lines with separators ordered last gives the classic
nested-dissection fill behaviour; SuperLU is then run with the NATURAL
column permutation on the symmetrically permuted matrix.
"""

from __future__ import annotations

import numpy as np

_LEAF = 32
_TOL = 1e-12


def _recurse(points, ids, lo, hi, edge, out):
    if len(ids) <= _LEAF:
        out.extend(ids.tolist())
        return
    spans = hi - lo
    axis = int(spans[1] > spans[0])
    if round(spans[axis] / edge) < 2:
        axis = 1 - axis
        if round(spans[axis] / edge) < 2:
            out.extend(ids.tolist())
            return
    cut = lo[axis] + edge * (round(spans[axis] / edge) // 2)
    coords = points[ids, axis]
    left = ids[coords < cut - _TOL]
    right = ids[coords > cut + _TOL]
    separator = ids[np.abs(coords - cut) <= _TOL]
    hi_left = hi.copy()
    hi_left[axis] = cut
    lo_right = lo.copy()
    lo_right[axis] = cut
    _recurse(points, left, lo, hi_left, edge, out)
    _recurse(points, right, lo_right, hi, edge, out)
    out.extend(separator.tolist())


def nested_dissection(points: np.ndarray, edge: float) -> np.ndarray:
    """Entity ordering by recursive bisection; cuts lie on mesh lines."""
    out: list[int] = []
    ids = np.arange(len(points), dtype=np.int64)
    _recurse(points, ids, np.zeros(2), np.ones(2), edge, out)
    return np.asarray(out, dtype=np.int64)


def stage_system_permutation(vspace, pspace, n_stages: int) -> np.ndarray:
    """Unknown permutation of the coupled stage system.

    All stage/component copies of one spatial entity stay adjacent (they share
    a sparsity neighbourhood); the per-stage gauge multipliers, whose rows are
    dense against the pressure block, go last.
    """
    mesh = vspace.mesh
    centers = mesh.cell_centers()
    entity_coords = np.vstack(
        [
            vspace.dof_coords,
            np.repeat(centers, 2, axis=0) if vspace.enriched else np.empty((0, 2)),
            np.repeat(centers, pspace.element.local_dim, axis=0),
        ]
    )
    order = nested_dissection(entity_coords, mesh.edge_length)

    nv = vspace.n_vector
    npr = pspace.n_dofs
    stage_dim = nv + npr + 1
    perm = np.empty(n_stages * stage_dim, dtype=np.int64)
    pos = 0
    stage_offsets = np.arange(n_stages) * stage_dim
    for ent in order:
        if ent < vspace.n_scalar:
            for off in stage_offsets:
                perm[pos] = off + 2 * ent
                perm[pos + 1] = off + 2 * ent + 1
                pos += 2
        else:
            p = ent - vspace.n_scalar
            for off in stage_offsets:
                perm[pos] = off + nv + p
                pos += 1
    for off in stage_offsets:
        perm[pos] = off + nv + npr
        pos += 1
    return perm
