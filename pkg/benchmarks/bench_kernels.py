"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is warmed up once (compilation) before timing.
"""

import argparse
import math
import time

import numpy as np

from heisenberg_iet import kernels
from heisenberg_iet.bundle import build_skew_product
from heisenberg_iet.iet import IetMap, validate_iet


def setup():
    lam = [math.sqrt(2) - 1, math.pi - 3, math.e - 2.5, math.sqrt(3) - 1.5]
    spec = validate_iet("ABCD", "ABCD", "DCBA", lam)
    T = IetMap.from_spec(spec)
    skew = build_skew_product(T, [1.3, 2.1, 1.7, 0.9], [0.1, 0.2, 0.3, 0.4])
    return skew.arrays(), float(T.total)


def cases(arr, total):
    rng = np.random.default_rng(0)
    L, w, h, b = arr["left"], arr["w"], arr["h"], arr["b"]
    x_many = rng.uniform(0, total, 2000)
    r_many = rng.uniform(0, 1, 2000)
    pieces = (np.array([0.0]), np.array([total]), np.array([0.0]), np.array([0.0]), np.array([0.0]))
    for _ in range(200):
        pieces = kernels._propagate_pieces_numpy(*pieces, L, w, h, b, kernels.PIECE_EPS)
    a = np.clip(np.searchsorted(L, x_many, side="right") - 1, 0, None)
    return {
        "iet_orbit (1 start x 1e5)": ("iet_orbit", (0.1234, 100_000, L, w, total)),
        "skew_orbit (2000 starts x 200)": ("skew_orbit", (x_many, r_many, 200, L, w, h, b, total)),
        "skew_orbit (1 start x 1e5)": ("skew_orbit", (x_many[:1], r_many[:1], 100_000, L, w, h, b, total)),
        f"propagate_pieces ({pieces[0].size} pieces)": ("propagate_pieces", (*pieces, L, w, h, b, kernels.PIECE_EPS)),
        "flow_vertical (2000 states, t=25)": (
            "flow_vertical",
            (a, x_many, np.zeros(2000), r_many, np.full(2000, 25.0), L, w, h, b, arr["img_left"], arr["img_sym"]),
        ),
    }


def timed(fn, args, repeat):
    fn(*args)
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    arr, total = setup()
    print(f"{'kernel':40s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for label, (name, kargs) in cases(arr, total).items():
        nb, npy = kernels.KERNELS[name]
        t_nb = timed(nb, kargs, args.repeat)
        t_np = timed(npy, kargs, args.repeat)
        print(f"{label:40s} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
