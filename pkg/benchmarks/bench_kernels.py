"""Time the smoothed-robustness kernels: numba vs pure numpy.

    python benchmarks/bench_kernels.py [--spec configs/task2.tltl] [--T 80] [--batch 24] [--repeat 10]

Both backends run in one process on the same DAG and batch; the script also
reports the largest value / gradient difference between them.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from tlps import _accel
from tlps.smoothing import build_dag
from tlps.tltl import parse_file

ROOT = Path(__file__).resolve().parents[1]


def timeit(fn, repeat):
    fn()  # warm-up (numba compile / cache load)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spec", default=str(ROOT / "configs" / "task2.tltl"))
    ap.add_argument("--T", type=int, default=80)
    ap.add_argument("--batch", type=int, default=24)
    ap.add_argument("--beta", type=float, default=9.0)
    ap.add_argument("--repeat", type=int, default=10)
    args = ap.parse_args(argv)

    vm, phi = parse_file(args.spec)
    dag = build_dag(phi, args.T)
    X = np.random.default_rng(0).normal(0, 4, size=(args.batch, args.T, len(vm.names)))
    print(f"dag: {dag.n_nodes} nodes, {dag.n_edges} edges; batch {args.batch} x T={args.T}")

    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    if not _accel.HAVE_NUMBA:
        print("numba not installed; timing numpy only")
    results = {}
    print(f"{'backend':8s} {'value ms':>10s} {'value+grad ms':>14s}")
    for b in backends:
        tv = timeit(lambda: dag.value(X, args.beta, backend=b), args.repeat)
        tg = timeit(lambda: dag.value_and_grad(X, args.beta, backend=b), args.repeat)
        results[b] = dag.value_and_grad(X, args.beta, backend=b)
        print(f"{b:8s} {tv:10.2f} {tg:14.2f}")
    if len(results) == 2:
        (v0, g0), (v1, g1) = results["numpy"], results["numba"]
        print(f"max |value diff| {np.abs(v0 - v1).max():.2e}, max |grad diff| {np.abs(g0 - g1).max():.2e}")


if __name__ == "__main__":
    main()
