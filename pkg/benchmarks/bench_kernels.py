"""Time the numba kernels against their numpy twins on sandbox-sized inputs.

    python3 benchmarks/bench_kernels.py --rows 2000 --items 2000 --repeat 5
"""
import argparse
import timeit

import numpy as np

from grew import _backend, kernels


def cases(rows, items, k_cand, top_k, seed):
    rng = np.random.default_rng(seed)
    coords = rng.normal(size=items)
    seeds = rng.random(rows)
    scores = rng.normal(size=(rows, items))
    scores[:, :20] = -np.inf
    green = kernels.green_rows_np(coords, seeds, 2 * np.pi, 0.5)
    ids = rng.integers(0, items, rows * top_k)
    id_seeds = np.repeat(seeds, top_k)
    ctx = rng.integers(0, items, rows)
    top = rng.integers(0, items, (rows, top_k))
    w = np.arange(top_k, 0, -1, dtype=np.int64)
    counts = np.zeros((items, items), dtype=np.int64)
    return {
        "green_rows": lambda f: f(coords, seeds, 2 * np.pi, 0.5),
        "count_green": lambda f: f(ids, id_seeds, coords, 2 * np.pi, 0.5),
        "topk_rows": lambda f: f(scores, top_k),
        "watermark_rows": lambda f: f(scores, green, k_cand, top_k, 1.0, 0.7),
        "accumulate_transitions": lambda f: f(counts, ctx, top, w),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--items", type=int, default=2000)
    ap.add_argument("--k-cand", type=int, default=100)
    ap.add_argument("--top-k", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not _backend.HAS_NUMBA:
        ap.error("numba is disabled (GREW_NUMBA) or not installed; nothing to compare")

    print(f"rows={args.rows} items={args.items} k_cand={args.k_cand} top_k={args.top_k} "
          f"best of {args.repeat}")
    print(f"{'kernel':<24}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, call in cases(args.rows, args.items, args.k_cand, args.top_k, args.seed).items():
        f_np, f_nb = getattr(kernels, f"{name}_np"), getattr(kernels, f"{name}_nb")
        call(f_nb)  # compile outside the timed region
        t_np = min(timeit.repeat(lambda: call(f_np), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: call(f_nb), number=1, repeat=args.repeat))
        print(f"{name:<24}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
