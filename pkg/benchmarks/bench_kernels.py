"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--size 4000] [--nnz 40000] [--repeat 5]

Each kernel runs once untimed per backend (JIT warm-up), then ``--repeat``
timed runs; the best time is reported along with a check that both backends
return identical matrices.
"""
import argparse
import time

import numpy as np

from sparse_code import kernels
from sparse_code.sim import generate_random_sparse
from sparse_code.sparse import block_product, scaled_accumulate


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--size", type=int, default=4000)
    ap.add_argument("--nnz", type=int, default=40000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    A = generate_random_sparse(args.size, args.size, args.nnz, "integer", rng)
    B = generate_random_sparse(args.size, args.size, args.nnz, "integer", rng)
    C, _ = block_product(A, B)
    keys = rng.integers(0, args.size * args.size, size=20 * args.nnz)
    vals = rng.standard_normal(keys.size)

    cases = {
        "block_product": lambda: block_product(A, B),
        "scaled_accumulate": lambda: scaled_accumulate(C, -3.0, C.scale(0.5)),
        "coalesce": lambda: kernels.coalesce(keys, vals),
    }
    prev = kernels.get_backend()
    results, outputs = {}, {}
    try:
        for backend in ("numpy", "numba"):
            kernels.set_backend(backend)
            for name, fn in cases.items():
                results[name, backend] = best_of(fn, args.repeat)
            outputs[backend] = block_product(A, B)[0]
    finally:
        kernels.set_backend(prev)

    print(f"A, B: {args.size}x{args.size}, nnz {args.nnz} each; nnz(A^T B) = {C.nnz}")
    print(f"{'kernel':<20}{'numpy s':>12}{'numba s':>12}{'speedup':>10}")
    for name in cases:
        a, b = results[name, "numpy"], results[name, "numba"]
        print(f"{name:<20}{a:>12.4f}{b:>12.4f}{a / b:>9.2f}x")
    print("outputs identical:", outputs["numpy"].equals(outputs["numba"]))


if __name__ == "__main__":
    main()
