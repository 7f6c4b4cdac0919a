"""Manufactured solutions driving the convergence studies.

Each case stores the exact velocity/pressure and a forcing derived
symbolically from the momentum equation in convective form,

    f = u_t - nu * Lap(u) + (u . grad) u + grad p,

which agrees with the skew form at the continuous level because every exact
velocity here is pointwise divergence free.  All callables are vectorized
over points: u(t, pts) -> (n, 2), p(t, pts) -> (n,).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy as sym

_X, _Y, _T = sym.symbols("x y t", real=True)


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    nu: float
    final_time: float
    homogeneous_bc: bool
    velocity: Callable
    velocity_gradient: Callable        # (t, pts) -> (n, 2, 2), [i, d] = d_d u_i
    velocity_time_derivative: Callable
    pressure: Callable
    pressure_mean: Callable            # analytic mean of p(t) over the unit square
    forcing: Callable

    def initial_velocity(self, pts: np.ndarray) -> np.ndarray:
        return self.velocity(0.0, pts)

    def pressure_zero_mean(self, t: float, pts: np.ndarray) -> np.ndarray:
        """Exact pressure shifted to zero mean, the quantity compared to p_h."""
        return self.pressure(t, pts) - self.pressure_mean(t)


def _vectorize(fn, shape):
    """Wrap a lambdified expression into a (t, pts) -> array callable."""

    def call(t, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        parts = fn(float(t), pts[:, 0], pts[:, 1])
        out = np.empty((pts.shape[0],) + shape)
        flat = out.reshape(pts.shape[0], -1)
        for idx, part in enumerate(parts):
            flat[:, idx] = part
        return out.reshape((pts.shape[0],) + shape) if shape else flat[:, 0]

    return call


def _lambdify_stack(exprs):
    flat = [sym.expand(e) for e in exprs]
    fns = [sym.lambdify((_T, _X, _Y), e, modules="numpy") for e in flat]

    def call(t, x, y):
        ones = np.ones_like(x)
        return [np.asarray(f(t, x, y), dtype=float) * ones for f in fns]

    return call


def _case_from_expressions(name, u1, u2, p, nu, final_time, homogeneous_bc):
    du1 = [sym.diff(u1, _X), sym.diff(u1, _Y)]
    du2 = [sym.diff(u2, _X), sym.diff(u2, _Y)]
    conv1 = u1 * du1[0] + u2 * du1[1]
    conv2 = u1 * du2[0] + u2 * du2[1]
    lap = lambda e: sym.diff(e, _X, 2) + sym.diff(e, _Y, 2)
    f1 = sym.diff(u1, _T) - nu * lap(u1) + conv1 + sym.diff(p, _X)
    f2 = sym.diff(u2, _T) - nu * lap(u2) + conv2 + sym.diff(p, _Y)

    mean_expr = sym.integrate(sym.integrate(p, (_X, 0, 1)), (_Y, 0, 1))
    mean_fn = sym.lambdify(_T, mean_expr, modules="numpy")

    vel = _vectorize(_lambdify_stack([u1, u2]), (2,))
    grad = _vectorize(_lambdify_stack([du1[0], du1[1], du2[0], du2[1]]), (2, 2))
    vel_t = _vectorize(_lambdify_stack([sym.diff(u1, _T), sym.diff(u2, _T)]), (2,))
    pressure = _vectorize(_lambdify_stack([p]), ())
    forcing = _vectorize(_lambdify_stack([f1, f2]), (2,))

    return ManufacturedCase(
        name=name,
        nu=float(nu),
        final_time=final_time,
        homogeneous_bc=homogeneous_bc,
        velocity=vel,
        velocity_gradient=grad,
        velocity_time_derivative=vel_t,
        pressure=pressure,
        pressure_mean=lambda t: float(mean_fn(float(t))),
        forcing=forcing,
    )


@lru_cache(maxsize=None)
def case_space_dominant(nu: float = 1e-6) -> ManufacturedCase:
    """Smooth-in-time solution whose spatial error dominates.

    Non-homogeneous Dirichlet data; both fields vanish at t = 0.
    """
    st = sym.sin(_T)
    u1 = st * sym.sin(sym.pi * _X) * sym.sin(sym.pi * _Y)
    u2 = st * sym.cos(sym.pi * _X) * sym.cos(sym.pi * _Y)
    p = st * (sym.sin(sym.pi * _X) + sym.cos(sym.pi * _Y) - sym.Integer(2) / sym.pi)
    return _case_from_expressions("space_dominant", u1, u2, p, nu, 1.0, False)


def _oscillating_stream_velocity():
    psi_x = _X**2 * (1 - _X) ** 2
    psi_y = _Y**2 * (1 - _Y) ** 2
    s = sym.sin(10 * sym.pi * _T)
    u1 = psi_x * sym.diff(psi_y, _Y) * s
    u2 = -sym.diff(psi_x, _X) * psi_y * s
    return u1, u2


@lru_cache(maxsize=None)
def case_time_dominant(nu: float = 1e-6) -> ManufacturedCase:
    """Rapidly oscillating polynomial-in-space solution; temporal error dominates."""
    u1, u2 = _oscillating_stream_velocity()
    p = -(_X**3 + _Y**3 - sym.Rational(1, 2)) * (
        sym.Rational(3, 2) + sym.Rational(1, 2) * sym.sin(10 * sym.pi * _T)
    )
    return _case_from_expressions("time_dominant", u1, u2, p, nu, 1.0, True)


@lru_cache(maxsize=None)
def case_rough_pressure(nu: float = 1e-6) -> ManufacturedCase:
    """Same velocity as the oscillating case, pressure with limited temporal smoothness."""
    u1, u2 = _oscillating_stream_velocity()
    p = -(_X**3 + _Y**3 - sym.Rational(1, 2)) * (
        sym.Rational(3, 2) + sym.Rational(1, 2) * _T ** sym.Rational(4, 3)
    )
    return _case_from_expressions("rough_pressure", u1, u2, p, nu, 1.0, True)


@lru_cache(maxsize=None)
def case_steady_check(nu: float = 1e-6) -> ManufacturedCase:
    """Stationary field u = (y, x), p = 0, f = (x, y); reproduced exactly."""
    return _case_from_expressions("steady_check", _Y, _X, sym.Integer(0), nu, 1.0, False)


_CASE_BUILDERS = {
    "space_dominant": case_space_dominant,
    "time_dominant": case_time_dominant,
    "rough_pressure": case_rough_pressure,
    "steady_check": case_steady_check,
}

CASE_NAMES = tuple(_CASE_BUILDERS)


def get_case(name: str, nu: float) -> ManufacturedCase:
    try:
        builder = _CASE_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {CASE_NAMES}") from None
    return builder(nu)
