"""Time the numba and numpy kernel backends side by side.

Run ``python benchmarks/bench_kernels.py`` (``--quick`` for smaller sizes).
Each case is warmed up once per backend so numba compilation is excluded,
then timed with ``timeit`` as the best of ``--repeat`` rounds.
"""

import argparse
import math
import timeit
import warnings

import numpy as np

from scatmesh import _backend
from scatmesh.geometry import Box, MeasurementSurface, WaveContext
from scatmesh.meshgen import uniform_grid
from scatmesh.meshsize import MeshSizeParams, TruncationWarning, coefficients_2d, density_field
from scatmesh.specfun import GreenKernel, green_matrix, jy_table


def cases(scale):
    rng = np.random.default_rng(0)
    x = np.linspace(0.05, 60.0, 20000 * scale)
    a = rng.uniform(-1, 1, (400 * scale, 2))
    b = rng.uniform(2, 3, (300 * scale, 2))
    a3 = rng.uniform(-1, 1, (300 * scale, 3))
    b3 = rng.uniform(2, 3, (200 * scale, 3))
    ctx = WaveContext(2.0)
    gamma = MeasurementSurface(
        np.array([[math.cos(4 * math.pi * n / 14), 4 * math.sin(2 * math.pi * n / 14)] for n in range(8)])
    )
    ring = MeasurementSurface.circle(64, 3.0)
    dom = Box([-1.5, -1.5], [1.5, 1.5])
    grid = uniform_grid(dom, 0.1 / scale)
    params = MeshSizeParams(alpha=0.9)
    return {
        "bessel J/Y, orders 0..20": lambda: jy_table(np.arange(0, 42, 2), x),
        "bessel J/Y, half orders": lambda: jy_table(np.arange(1, 42, 2), x),
        "green matrix 2D": lambda: green_matrix(GreenKernel(2, 3.0), a, b),
        "green matrix 3D": lambda: green_matrix(GreenKernel(3, 3.0), a3, b3),
        "coefficients (8 pts)": lambda: coefficients_2d(ctx, [1.0, 3.5], [1.0, 0.0], gamma, params),
        "density field": lambda: density_field(ctx, dom, [1.0, 0.0], ring, params, grid),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args(argv)
    warnings.simplefilter("ignore", TruncationWarning)
    scale = 1 if args.quick else 2
    table = {}
    previous = _backend.backend_name()
    try:
        for name in ("numpy", "numba"):
            _backend.set_backend(name)
            for label, fn in cases(scale).items():
                fn()
                table.setdefault(label, {})[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    finally:
        _backend.set_backend(previous)
    width = max(map(len, table))
    print(f"{'case':<{width}}  {'numpy [ms]':>11}  {'numba [ms]':>11}  {'speedup':>8}")
    for label, t in table.items():
        print(f"{label:<{width}}  {1e3 * t['numpy']:11.2f}  {1e3 * t['numba']:11.2f}  {t['numpy'] / t['numba']:8.2f}")


if __name__ == "__main__":
    main()
