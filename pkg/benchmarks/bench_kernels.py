#!/usr/bin/env python3
"""Benchmark the hot assembly kernels: numba loops vs vectorized numpy.

Runs the convection-term kernel (the per-Newton-iteration hot spot) and the
field-evaluation kernel on a range of discretizations and prints a timing
table.  The compiled path is what the solver uses by default; set
LPSDG_DISABLE_NUMBA=1 to run the solver itself on the numpy path.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from lpsdg import build_spaces, build_uniform_mesh, make_context
from lpsdg.kernels import (
    NUMBA_AVAILABLE,
    _convection_numpy,
    _field_at_quadrature_numpy,
)
from lpsdg.quadrature import tensor_gauss

if NUMBA_AVAILABLE:
    from lpsdg.kernels import _convection_numba, _field_at_quadrature_numba


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    configs = [
        ("level 3, r=2 (8x8 mesh)", 3, 2),
        ("level 5, r=2 (32x32 mesh)", 5, 2),
        ("level 3, r=4 (8x8 mesh)", 3, 4),
    ]
    header = f"{'configuration':>28} {'kernel':>12} {'numpy':>12} {'numba':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for label, level, r in configs:
        mesh = build_uniform_mesh(level)
        vs, ps = build_spaces(mesh, r, enriched=True)
        ctx = make_context(vs, ps, tensor_gauss(r + 2))
        rng = np.random.default_rng(0)
        coeffs = rng.standard_normal(vs.n_vector)
        args_field = (coeffs, vs.cell_dofs, ctx.phi, ctx.gphi)
        vals, grads = _field_at_quadrature_numpy(*args_field)
        args_conv = (vals, grads, ctx.phi, ctx.gphi, ctx.wdet)

        rows = [("field eval", _field_at_quadrature_numpy, args_field, None),
                ("convection", _convection_numpy, args_conv, None)]
        if NUMBA_AVAILABLE:
            _field_at_quadrature_numba(*args_field)  # compile outside timing
            _convection_numba(*args_conv)
            rows = [
                ("field eval", _field_at_quadrature_numpy, args_field, _field_at_quadrature_numba),
                ("convection", _convection_numpy, args_conv, _convection_numba),
            ]
        for name, fn_np, fn_args, fn_nb in rows:
            t_np = timeit(lambda: fn_np(*fn_args), args.repeats)
            if fn_nb is None:
                print(f"{label:>28} {name:>12} {t_np * 1e3:>10.3f}ms {'n/a':>12} {'':>9}")
            else:
                t_nb = timeit(lambda: fn_nb(*fn_args), args.repeats)
                print(
                    f"{label:>28} {name:>12} {t_np * 1e3:>10.3f}ms {t_nb * 1e3:>10.3f}ms "
                    f"{t_np / t_nb:>8.2f}x"
                )


if __name__ == "__main__":
    main()
