"""Timing comparison of the JIT-compiled kernels against their numpy twins.

Run:  python3 benchmarks/bench_kernels.py [--repeat 50] [--size 128]

Both code paths compute identical arithmetic (the test suite asserts
exact agreement); this script only measures speed.  The JIT path is
toggled per call via PERCEPVID_DISABLE_NUMBA, so one process can time
both fairly after a warmup pass that absorbs compilation.
"""

from __future__ import annotations

import argparse
import os
import statistics
import time

import numpy as np

from percepvid.accel import DISABLE_ENV, HAS_NUMBA
from percepvid.percep.kernels import rasterize_discs
from percepvid.world.kernels import render_frame
from percepvid.world.scene import Camera


def scene_inputs(size: int):
    rng = np.random.default_rng(0)
    n = 3
    centers = rng.uniform(-0.5, 0.5, size=(n, 3))
    centers[:, 2] += 4.0
    radii = rng.uniform(0.2, 0.35, size=n)
    ids = np.arange(n, dtype=np.int64)
    cam = Camera.default(size, size, 1.0)
    return centers, radii, ids, cam


def disc_inputs(size: int):
    rng = np.random.default_rng(1)
    n = 4096
    img = np.zeros((3, size, size), dtype=np.float32)
    us = rng.uniform(0, size - 1, size=n)
    vs = rng.uniform(0, size - 1, size=n)
    colors = rng.random((n, 3)).astype(np.float64)
    return img, us, vs, colors


def timed(fn, repeat: int) -> list[float]:
    fn()  # warmup (JIT compile / cache touch)
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--size", type=int, default=128)
    args = ap.parse_args()

    if not HAS_NUMBA:
        print("numba is not importable; only the numpy path can run")

    centers, radii, ids, cam = scene_inputs(args.size)
    img, us, vs, colors = disc_inputs(args.size)

    cases = {
        "render_frame": lambda: render_frame(centers, radii, ids, cam, 1.0, args.size, args.size),
        "rasterize_discs": lambda: rasterize_discs(img.copy(), us, vs, colors, radius=1),
    }

    print(f"{'kernel':<18} {'path':<6} {'median ms':>10} {'min ms':>10}")
    ratios = {}
    for name, fn in cases.items():
        medians = {}
        for path, disabled in (("numba", ""), ("numpy", "1")):
            if path == "numba" and not HAS_NUMBA:
                continue
            os.environ[DISABLE_ENV] = disabled
            times = timed(fn, args.repeat)
            med = statistics.median(times) * 1e3
            medians[path] = med
            print(f"{name:<18} {path:<6} {med:>10.3f} {min(times) * 1e3:>10.3f}")
        if len(medians) == 2:
            ratios[name] = medians["numpy"] / medians["numba"]
    os.environ.pop(DISABLE_ENV, None)
    for name, r in ratios.items():
        print(f"{name}: numba is {r:.1f}x the numpy path")


if __name__ == "__main__":
    main()
