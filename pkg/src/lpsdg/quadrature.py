"""Tensor-product Gauss-Legendre quadrature on the reference square [-1,1]^2."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TensorQuadrature:
    points: np.ndarray   # (n, 2)
    weights: np.ndarray  # (n,)

    @property
    def n_points(self) -> int:
        return len(self.weights)


def gauss_1d(n: int):
    return np.polynomial.legendre.leggauss(n)


def tensor_gauss(n_per_direction: int) -> TensorQuadrature:
    """Gauss-Legendre rule with n points per direction, exact to degree 2n-1."""
    x, w = gauss_1d(n_per_direction)
    xg, yg = np.meshgrid(x, x, indexing="xy")
    points = np.column_stack([xg.ravel(), yg.ravel()])
    weights = np.outer(w, w).ravel()
    return TensorQuadrature(points, weights)
