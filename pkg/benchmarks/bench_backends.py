"""Compare the compiled kernels against the pure-Python fallback.

Times the two hot kernels (split scanning, batch routing) and a full
train + repair pipeline on synthetic data, and verifies on the way that
both backends return identical results.

Usage: python benchmarks/bench_backends.py [--rows 20000] [--features 30]
"""

import argparse
import time

import numpy as np

from fairforest import Dataset, RelabelConfig, TrainConfig
from fairforest._kernels import load_backend


def make_data(rng, rows, features):
    s = (rng.random(rows) < 0.5).astype(np.uint8)
    X = rng.normal(size=(rows, features))
    X[:, 0] = s
    score = X[:, 1] + 0.7 * s + rng.normal(scale=0.6, size=rows)
    y = (score > 0.5).astype(np.uint8)
    names = [f"f{j}" for j in range(features)]
    return Dataset(X, y, s, names, "f0")


def timeit(fn, repeat=3):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_scan(backend, rng, rows):
    values = np.sort(rng.normal(size=rows))
    y = rng.integers(0, 2, rows).astype(np.uint8)
    s = rng.integers(0, 2, rows).astype(np.uint8)
    return timeit(lambda: backend.scan_split(values, y, s, 1, 3))


def bench_route(backend, data, forest):
    tree = forest.trees[0]
    args = (tree.kind, tree.feature, tree.threshold, tree.left, tree.right,
            tree.root, data.X)
    return timeit(lambda: backend.route_batch(*args))


def bench_pipeline(data, config):
    from fairforest import leaf_based_flip, train_forest

    def run():
        forest = train_forest(data, config)
        return leaf_based_flip(forest, data, RelabelConfig(0.02, 1.0))

    return timeit(run, repeat=1)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=20000)
    parser.add_argument("--features", type=int, default=30)
    parser.add_argument("--trees", type=int, default=10)
    parser.add_argument("--depth", type=int, default=8)
    args = parser.parse_args()

    pure = load_backend("pure")
    try:
        compiled = load_backend("compiled")
    except ImportError:
        print("compiled backend not built; nothing to compare")
        return

    rng = np.random.default_rng(0)
    data = make_data(rng, args.rows, args.features)
    config = TrainConfig(n_trees=args.trees, max_depth=args.depth, seed=0)

    print(f"rows={args.rows} features={args.features} "
          f"trees={args.trees} depth={args.depth}\n")
    print(f"{'kernel':<28}{'pure':>12}{'compiled':>12}{'speedup':>10}")

    t_pure, r_pure = bench_scan(pure, np.random.default_rng(1), args.rows)
    t_comp, r_comp = bench_scan(compiled, np.random.default_rng(1), args.rows)
    assert r_pure == r_comp, "backends disagree on scan_split"
    print(f"{'scan_split (fair_add)':<28}{t_pure:>11.4f}s{t_comp:>11.4f}s"
          f"{t_pure / t_comp:>9.1f}x")

    import os

    from fairforest import train_forest

    os.environ.pop("FAIRFOREST_BACKEND", None)
    forest = train_forest(data, TrainConfig(n_trees=1, max_depth=args.depth, seed=0))
    t_pure, r_pure = bench_route(pure, data, forest)
    t_comp, r_comp = bench_route(compiled, data, forest)
    assert np.array_equal(r_pure, r_comp), "backends disagree on route_batch"
    print(f"{'route_batch':<28}{t_pure:>11.4f}s{t_comp:>11.4f}s"
          f"{t_pure / t_comp:>9.1f}x")

    # full pipeline timing runs whatever backend fairforest imported with;
    # rerun under FAIRFOREST_BACKEND=pure to get the other column
    t_active, (_, report) = bench_pipeline(data, config)
    from fairforest import kernel_backend

    print(f"\ntrain+repair pipeline with the {kernel_backend} backend: "
          f"{t_active:.2f}s ({len(report.iterations)} repair iterations)")


if __name__ == "__main__":
    main()
