"""Compare the compiled and pure-Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 5]

Each kernel is timed on both backends and the outputs are checked for equality.
"""

import argparse
import time

import numpy as np

from gen2sat import _pycore
from gen2sat.branching import FBranchingConfig
from gen2sat.digraph import build_digraph
from gen2sat.formula import ModelParams, sample_formula
from gen2sat.rng import make_rng

try:
    from gen2sat import _core
except ImportError:  # pragma: no cover
    _core = None


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, dict):
        return all(np.array_equal(a[k], b[k]) for k in a)
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def cases(n):
    params = ModelParams(2.0, 2.0, 2.0)
    g = build_digraph(sample_formula(n, params, 1))
    p = params.probabilities(n)
    alive = np.arange(1, n)
    T = int(np.sqrt(n))
    cfg = FBranchingConfig.from_params(params)
    cdfs = (cfg.F0.cdf, cfg.F1.cdf, cfg.F2.cdf)
    return {
        "scc": lambda m: m.scc(g.indptr, g.indices, 2 * n),
        "explore": lambda m: m.explore(*p, alive, n, 0, T, 0, make_rng(7)),
        "explore_coupled": lambda m: m.explore(*p, alive, n, 0, T, 0, make_rng(7), cdfs),
        "traverse": lambda m: m.traverse(*cdfs, 0, 2000, make_rng(7)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'kernel':<16}{'python ms':>12}{'cython ms':>12}{'speedup':>10}  equal")
    for name, fn in cases(args.n).items():
        tp, op = best_of(lambda: fn(_pycore), args.repeat)
        if _core is None:
            print(f"{name:<16}{tp * 1e3:12.3f}{'-':>12}{'-':>10}  -")
            continue
        tc, oc = best_of(lambda: fn(_core), args.repeat)
        print(f"{name:<16}{tp * 1e3:12.3f}{tc * 1e3:12.3f}{tp / tc:10.1f}  {same(op, oc)}")


if __name__ == "__main__":
    main()
