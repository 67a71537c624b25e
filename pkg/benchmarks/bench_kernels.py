"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
The first numba call includes JIT compilation; timings below are after a
warmup pass.
"""

import argparse
import math
import time

import numpy as np

from escapesim import _kernels_np

try:
    from escapesim import _kernels_nb
except ImportError:
    _kernels_nb = None


def scene(rng, npoly=10):
    polys = []
    for _ in range(npoly):
        c = rng.uniform(0.5, 3.5, 2)
        hu, hn = rng.uniform(0.05, 0.3, 2)
        th = rng.uniform(0, math.pi)
        u = np.array([math.cos(th), math.sin(th)])
        n = np.array([-u[1], u[0]])
        polys.append(
            np.array([c + u * hu + n * hn, c - u * hu + n * hn,
                      c - u * hu - n * hn, c + u * hu - n * hn])
        )
    verts = np.concatenate(polys)
    offsets = np.cumsum([0] + [4] * npoly).astype(np.int64)
    segs = np.concatenate(
        [np.concatenate([p, np.roll(p, -1, axis=0)], axis=1) for p in polys]
        + [np.array([[0, 0, 4, 0], [4, 0, 4, 4], [4, 4, 0, 4], [0, 4, 0, 0]], dtype=float)]
    )
    arena = np.array([0.0, 0.0, 4.0, 4.0])
    return verts, offsets, segs, arena


def timeit(fn, repeat):
    fn()  # warmup (JIT compile on the numba side)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    verts, offsets, segs, arena = scene(rng)
    angles = 2 * math.pi * np.arange(500) / 500 + 0.37
    poses = np.column_stack(
        [rng.uniform(0.5, 3.5, 64), rng.uniform(0.5, 3.5, 64), rng.uniform(-3, 3, 64)]
    )
    pts = np.column_stack([rng.uniform(0, 4, 40_000), rng.uniform(0, 4, 40_000)])
    corners = rng.uniform(-0.3, 0.3, size=(14, 4, 2))
    for k in range(corners.shape[0]):
        c = corners[k] - corners[k].mean(axis=0)
        corners[k] = corners[k][np.argsort(np.arctan2(c[:, 1], c[:, 0]))]
    corners[0] = np.array(
        [[0.175, 0.175], [-0.175, 0.175], [-0.175, -0.175], [0.175, -0.175]]
    )

    cases = {
        "raycast (500 rays x 44 segs)": lambda m: lambda: m.raycast(
            2.0, 2.0, angles, segs, 8.0
        ),
        "sweep collision (64 poses)": lambda m: lambda: m.sweep_first_collision(
            poses, 0.175, 0.175, verts, offsets, arena
        ),
        "boundary cone table (500 rays)": lambda m: lambda: m.cone_far_table(
            corners, angles, 2 * math.pi / 500, 0.175, 0.175, 0.008
        ),
        "clearance field (40k cells)": lambda m: lambda: m.scene_distance(
            pts, verts, offsets, arena
        ),
        "rasterize (200x200)": lambda m: lambda: m.rasterize_cells(
            verts, offsets, 0.0, 0.0, 0.02, 200, 200
        ),
    }

    print(f"{'kernel':36s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for name, make in cases.items():
        t_np = timeit(make(_kernels_np), args.repeat)
        if _kernels_nb is not None:
            t_nb = timeit(make(_kernels_nb), args.repeat)
            print(f"{name:36s} {t_np * 1e3:10.3f}ms {t_nb * 1e3:10.3f}ms {t_np / t_nb:8.1f}x")
        else:
            print(f"{name:36s} {t_np * 1e3:10.3f}ms {'n/a':>12s}")


if __name__ == "__main__":
    main()
