"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel and workload with the best-of-N wall time of
each backend, the speedup, and the max abs difference between outputs.
"""

import argparse
import timeit

import numpy as np

from dcgan import _kernels_py

try:
    from dcgan import _kernels
except ImportError:  # extension not built
    _kernels = None


def workloads():
    rng = np.random.default_rng(0)
    for B, J, D, m in [(256, 100, 2, 4), (256, 100, 3, 4), (64, 50, 4, 5)]:
        x = rng.normal(scale=0.1, size=(B, J, D))
        yield f"batch_signature B={B} J={J} D={D} m={m}", "batch_signature", (x, m)
    x = rng.normal(scale=0.1, size=(128, 100, 2))
    yield "stream_signature B=128 J=100 D=2 m=3", "stream_signature", (x, 3)
    for n in (1024, 2048):
        y = rng.uniform(-2, 2, n)
        yield f"opinion_drift n={n}", "opinion_drift", (y, 6.0, 0.2)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; build with `python setup.py build_ext --inplace`")
        return 1
    print(f"{'workload':42s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s} {'max diff':>9s}")
    for label, name, fargs in workloads():
        fc, fp = getattr(_kernels, name), getattr(_kernels_py, name)
        tc = min(timeit.repeat(lambda: fc(*fargs), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fp(*fargs), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(fc(*fargs) - fp(*fargs))))
        print(f"{label:42s} {tc * 1e3:10.2f} {tp * 1e3:10.2f} {tp / tc:7.1f}x {diff:9.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
