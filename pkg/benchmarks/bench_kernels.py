"""Compare the compiled and pure-Python geometry/clustering kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from shsthreat import kernels


def cases(rng):
    pts = rng.normal(size=(3000, 2))
    ang = np.sort(rng.uniform(0, 2 * np.pi, 60))
    rad = rng.uniform(0.5, 1.0, 60)
    vx, vy = rad * np.cos(ang), rad * np.sin(ang)
    qx, qy = rng.uniform(-1, 1, 20000), rng.uniform(-1, 1, 20000)
    x = np.sort(rng.normal(size=5000))
    y = rng.integers(0, 6, 5000)
    return {
        "dbscan_labels(3000 pts)": lambda m: m.dbscan_labels(pts, 0.08, 4),
        "points_in_polygon(20000 x 60)": lambda m: m.points_in_polygon(qx, qy, vx, vy, 1e-9),
        "min_edge_distance(20000 x 60)": lambda m: m.min_edge_distance(qx, qy, vx, vy),
        "gini_best_split(5000, 6 labels)": lambda m: m.gini_best_split(x, y, 6, 5),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = kernels.implementations()
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s}" + "".join(f"{name:>12s}" for name in impls) + "   speedup")
    for label, fn in cases(rng).items():
        times = {}
        for name, mod in impls.items():
            fn(mod)  # warm up
            times[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        row = f"{label:34s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times.values())
        if "cython" in times and "python" in times:
            row += f"   {times['python'] / times['cython']:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
