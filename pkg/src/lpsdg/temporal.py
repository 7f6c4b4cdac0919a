"""Right-sided Gauss-Radau rules and the stage coefficients of the time stepping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ORDER = 5


@dataclass(frozen=True)
class RadauRule:
    """(k+1)-point right-sided Gauss-Radau rule on [-1, 1].

    The last point is exactly 1; the rule integrates polynomials of degree
    up to 2k exactly.
    """

    k: int
    points: np.ndarray   # (k+1,), strictly increasing, points[-1] == 1.0
    weights: np.ndarray  # (k+1,), positive, summing to 2


@dataclass(frozen=True)
class SlabCoefficients:
    """Stage matrices of the discontinuous-in-time scheme on one slab.

    alpha[i, j] = L_j'(t_i) + beta[i] * L_j(-1) and beta[i] = L_i(-1) / w_i,
    where L_j are the Lagrange polynomials of the Radau points t_i with
    weights w_i.  `basis_at_left` stores L_j(-1), needed to evaluate the
    stage polynomial at the left end of the slab (jump terms).
    """

    alpha: np.ndarray          # (k+1, k+1)
    beta: np.ndarray           # (k+1,)
    basis_at_left: np.ndarray  # (k+1,)


@dataclass(frozen=True)
class TimePartition:
    """Partition 0 = t_0 < t_1 < ... < t_N = T into slabs."""

    times: np.ndarray  # (N+1,)

    def __post_init__(self):
        taus = np.diff(self.times)
        if len(taus) == 0 or np.any(taus <= 0):
            raise ValueError("partition times must be strictly increasing")

    @property
    def n_slabs(self) -> int:
        return len(self.times) - 1

    @property
    def slab_lengths(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def final_time(self) -> float:
        return float(self.times[-1])


def uniform_partition(final_time: float, n_slabs: int) -> TimePartition:
    if final_time <= 0 or n_slabs < 1:
        raise ValueError("final_time must be positive and n_slabs >= 1")
    return TimePartition(np.linspace(0.0, final_time, n_slabs + 1))


def gauss_radau(k: int) -> RadauRule:
    """Right-sided Gauss-Radau rule with k+1 points on [-1, 1].

    The interior points are the roots of P_{k+1} - P_k (Legendre), found via
    the companion matrix; the weights solve the monomial moment equations.
    """
    if not 0 <= k <= MAX_ORDER:
        raise ValueError(f"supported range is 0 <= k <= {MAX_ORDER}, got {k}")
    if k == 0:
        return RadauRule(0, np.array([1.0]), np.array([2.0]))

    leg = np.polynomial.legendre.Legendre
    radau_poly = leg.basis(k + 1) - leg.basis(k)
    points = np.sort(np.real(radau_poly.roots()))
    # a Newton sweep tightens the companion-matrix roots; +1 is a root by
    # construction and is pinned exactly
    deriv = radau_poly.deriv()
    for _ in range(2):
        points = points - radau_poly(points) / deriv(points)
    points[-1] = 1.0

    exponents = np.arange(k + 1)
    moments = (1.0 - (-1.0) ** (exponents + 1)) / (exponents + 1)
    weights = np.linalg.solve(np.vander(points, increasing=True).T, moments)
    return RadauRule(k, points, weights)


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / diff.prod(axis=1)


def lagrange_values(nodes: np.ndarray, x) -> np.ndarray:
    """Values L_j(x) of the Lagrange basis for `nodes`, shape (len(x), len(nodes))."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = barycentric_weights(nodes)
    values = np.empty((len(x), len(nodes)))
    for row, xv in enumerate(x):
        d = xv - nodes
        hit = np.nonzero(d == 0.0)[0]
        if hit.size:
            values[row] = 0.0
            values[row, hit[0]] = 1.0
        else:
            terms = w / d
            values[row] = terms / terms.sum()
    return values


def lagrange_diff_matrix(nodes: np.ndarray) -> np.ndarray:
    """D[i, j] = L_j'(nodes[i]) by the barycentric differentiation formula."""
    nodes = np.asarray(nodes, dtype=float)
    w = barycentric_weights(nodes)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    d = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def slab_coefficients(rule: RadauRule) -> SlabCoefficients:
    """Stage matrices alpha, beta for the given Radau rule."""
    at_left = lagrange_values(rule.points, -1.0)[0]
    beta = at_left / rule.weights
    alpha = lagrange_diff_matrix(rule.points) + np.outer(beta, at_left)
    return SlabCoefficients(alpha=alpha, beta=beta, basis_at_left=at_left)


def map_to_slab(rule: RadauRule, t_prev: float, tau: float):
    """Transform rule points/weights from [-1, 1] onto (t_prev, t_prev + tau]."""
    if tau <= 0:
        raise ValueError(f"slab length must be positive, got {tau}")
    points = t_prev + 0.5 * tau * (rule.points + 1.0)
    return points, 0.5 * tau * rule.weights
