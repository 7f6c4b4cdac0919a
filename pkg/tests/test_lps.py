import numpy as np
import pytest

from lpsdg import StabParams, assemble_stabilization, build_spaces, build_uniform_mesh
from lpsdg.assembly import make_context
from lpsdg.lps import projector_for_order, scalar_stabilization_block
from lpsdg.quadrature import tensor_gauss
from lpsdg.slab import initial_velocity
from lpsdg import kernels


@pytest.fixture
def projector():
    return projector_for_order(2, tensor_gauss(4))


def test_projection_is_idempotent(projector):
    p = projector.projection
    assert np.abs(p @ p - p).max() < 1e-12


def test_projection_reproduces_projection_space(projector):
    pts = projector.quad.points
    for values in (np.ones(len(pts)), pts[:, 0].copy(), 1.5 * pts[:, 1] - 0.25):
        assert np.abs(projector.project_values(values) - values).max() < 1e-13
        assert np.abs(projector.fluctuate_values(values)).max() < 1e-13


def test_fluctuation_of_quadratic_matches_least_squares_fit(projector):
    # brute-force L2 fit of x^2 by {1, x, y} on the square via dense lstsq
    quad = tensor_gauss(8)
    target = quad.points[:, 0] ** 2
    basis = np.column_stack([np.ones(quad.n_points), quad.points])
    w_sqrt = np.sqrt(quad.weights)
    fit, *_ = np.linalg.lstsq(basis * w_sqrt[:, None], target * w_sqrt, rcond=None)
    residual = target - basis @ fit
    expect_sq = float(quad.weights @ residual**2)
    # analytic value: || x^2 - 1/3 ||^2 over [-1,1]^2 = 16/45
    assert expect_sq == pytest.approx(16.0 / 45.0, abs=1e-12)

    vals = projector.quad.points[:, 0] ** 2
    fluct = projector.fluctuate_values(vals)
    got_sq = float(projector.quad.weights @ fluct**2)
    assert got_sq == pytest.approx(expect_sq, abs=1e-12)
    assert got_sq > 0.1


def test_stab_params_validation():
    assert StabParams(0.0).mu == 0.0
    with pytest.raises(ValueError):
        StabParams(-0.5)


def _setup(level=1, r=2, mu=0.1):
    mesh = build_uniform_mesh(level)
    vs, ps = build_spaces(mesh, r, enriched=True)
    quad = tensor_gauss(r + 2)
    ctx = make_context(vs, ps, quad)
    projector = projector_for_order(r, quad)
    s = assemble_stabilization(vs, projector, StabParams(mu))
    return mesh, vs, ps, ctx, projector, s


def test_stabilization_symmetric_and_psd():
    _, vs, _, _, _, s = _setup(level=2, mu=0.1)
    diff = (s - s.T).tocoo()
    scale = np.abs(s.data).max()
    assert (np.abs(diff.data).max() if diff.nnz else 0.0) <= 1e-13 * scale
    rng = np.random.default_rng(1)
    for _ in range(20):
        v = rng.standard_normal(vs.n_vector)
        assert v @ (s @ v) >= -1e-12


def test_stabilization_annihilates_linear_field():
    _, vs, _, ctx, _, s = _setup(level=1, mu=0.1)
    u = initial_velocity(ctx, lambda pts: np.column_stack([pts[:, 1], pts[:, 0]]))
    assert np.abs(s @ u).max() < 1e-13


def test_zero_weight_disables_stabilization():
    _, _, _, _, _, s = _setup(level=1, mu=0.0)
    assert s.nnz == 0 or np.abs(s.data).max() == 0.0


def test_quadratic_interpolant_fluctuation_is_zero_for_gradient():
    # grad of x^2 is linear, inside the projection space: u^T S u = 0
    _, vs, _, ctx, _, s = _setup(level=1, mu=0.1)
    u = initial_velocity(ctx, lambda pts: np.column_stack([pts[:, 0] ** 2, 0 * pts[:, 0]]))
    assert abs(u @ (s @ u)) < 1e-14


def test_matrix_matches_cellwise_quadrature_oracle():
    # dense per-cell oracle: mu * sum_K sum_d ||kappa d_d u_h||^2 for a field
    # with genuinely quadratic gradient (cubic interpolant input)
    mesh, vs, ps, ctx, projector, s = _setup(level=1, mu=0.1)
    u = initial_velocity(ctx, lambda pts: np.column_stack([pts[:, 0] ** 3, pts[:, 1] ** 3]))
    got = float(u @ (s @ u))

    _, grads = kernels.field_at_quadrature(u, vs.cell_dofs, ctx.phi, ctx.gphi)
    expect = 0.0
    for c in range(mesh.n_cells):
        for i in range(2):
            for d in range(2):
                fluct = projector.fluctuate_values(grads[c, :, i, d])
                expect += 0.1 * float(ctx.wdet @ fluct**2)
    assert got == pytest.approx(expect, rel=1e-12)
    assert got > 0


def test_divergence_fluctuation_bound():
    # sum_K ||kappa div v||^2 <= d * sum_K ||kappa grad v||^2 with d = 2
    mesh, vs, ps, ctx, projector, _ = _setup(level=2, r=2)
    rng = np.random.default_rng(9)
    for _ in range(5):
        v = rng.standard_normal(vs.n_vector)
        _, grads = kernels.field_at_quadrature(v, vs.cell_dofs, ctx.phi, ctx.gphi)
        div_vals = grads[:, :, 0, 0] + grads[:, :, 1, 1]
        div_fluct = projector.fluctuate_values(div_vals)
        lhs = float(np.einsum("cq,cq,q->", div_fluct, div_fluct, ctx.wdet))
        grad_fluct = np.einsum("qp,cpid->cqid", projector.fluctuation, grads)
        rhs = float(np.einsum("cqid,cqid,q->", grad_fluct, grad_fluct, ctx.wdet))
        assert lhs <= 2.0 * rhs + 1e-12


@pytest.mark.parametrize("r", [2, 3])
def test_fluctuation_decay_rate(r):
    # smooth-field fluctuation energy decays like h^(2r)
    quad = tensor_gauss(r + 2)
    projector = projector_for_order(r, quad)
    energies = []
    hs = []
    for level in (1, 2, 3, 4):
        mesh = build_uniform_mesh(level)
        vs, ps = build_spaces(mesh, r)
        ctx = make_context(vs, ps, quad)
        pts = ctx.phys_points.reshape(-1, 2)
        values = (np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])).reshape(
            mesh.n_cells, quad.n_points
        )
        fluct = projector.fluctuate_values(values)
        energies.append(float(np.einsum("cq,cq,q->", fluct, fluct, ctx.wdet)))
        hs.append(mesh.edge_length)
    rates = np.diff(np.log(energies)) / np.diff(np.log(hs))
    assert rates[-1] >= 2 * r - 0.2


def test_block_is_reference_only():
    # the scalar stabilization block is scale free: identical across levels
    blocks = []
    for level in (1, 3):
        mesh = build_uniform_mesh(level)
        vs, _ = build_spaces(mesh, 2)
        quad = tensor_gauss(4)
        blocks.append(scalar_stabilization_block(vs, projector_for_order(2, quad), StabParams(1.0)))
    assert np.abs(blocks[0] - blocks[1]).max() < 1e-15
