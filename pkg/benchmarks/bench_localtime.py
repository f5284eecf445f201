"""Compare the compiled and NumPy local-time kernels.

Usage::

    python benchmarks/bench_localtime.py [--sizes 64 128 256] [--d 2] [--json out.json]

Times ``value`` and ``value_force`` for each available backend on random
fBm-like paths and reports the speed-up of the compiled kernel.
"""

import argparse
import json
import platform
import sys
import timeit

import numpy as np

from fedwards import _backend
from fedwards.kernel import basis_for
from fedwards.localtime import grid_weight
from fedwards.model import ModelParams, RngStream


def _time(fn, repeat=5):
    n, _ = timeit.Timer(fn).autorange()
    best = min(timeit.Timer(fn).repeat(repeat=repeat, number=n))
    return best / n


def run(sizes, d, eps):
    rows = []
    backends = {name: _backend.get_backend(name) for name in _backend.available_backends()}
    for M in sizes:
        p = ModelParams(H=min(0.4, 0.9 / d), d=d, N=min(12, M), M=M, epsilon=eps)
        gb = basis_for(p)
        w = grid_weight(gb.grid)
        path = np.ascontiguousarray(RngStream(0, M).generator().standard_normal((d, gb.N)) @ gb.path_matrix)
        ref = None
        for name, k in backends.items():
            val, _ = k.value_force(path, eps, w)
            if ref is None:
                ref = val
            row = {
                "backend": name,
                "M": M,
                "d": d,
                "value_us": 1e6 * _time(lambda: k.value(path, eps, w)),
                "value_force_us": 1e6 * _time(lambda: k.value_force(path, eps, w)),
                "rel_diff": abs(val - ref) / abs(ref),
            }
            rows.append(row)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--json", default=None, help="also write the table here")
    args = ap.parse_args(argv)

    rows = run(args.sizes, args.d, args.epsilon)
    print(f"python {platform.python_version()}, numpy {np.__version__}, default backend {_backend.BACKEND}")
    print(f"{'M':>5} {'backend':>8} {'value [us]':>12} {'value+force [us]':>17} {'rel diff':>9}")
    for r in rows:
        print(f"{r['M']:>5} {r['backend']:>8} {r['value_us']:>12.1f} {r['value_force_us']:>17.1f} {r['rel_diff']:>9.1e}")
    by = {(r["M"], r["backend"]): r for r in rows}
    for M in args.sizes:
        if (M, "cython") in by and (M, "python") in by:
            s = by[(M, "python")]["value_force_us"] / by[(M, "cython")]["value_force_us"]
            print(f"M={M}: compiled value+force is {s:.1f}x faster")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
