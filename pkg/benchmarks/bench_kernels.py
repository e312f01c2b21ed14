"""Compare the compiled stepping kernel with its pure-Python fallback.

Runs the scalar two-regime example ensemble (theta = 1, m = 100, horizon 8)
with each backend, checks that both produce the same moment curve, and
prints wall time per path.

    python benchmarks/bench_kernels.py --paths 200
"""

import argparse
import time

import numpy as np

from nsdde import kernels
from nsdde.ensemble import EnsembleConfig, run_ensemble
from nsdde.model import InitialSegment, builtin_example_sec5
from nsdde.theta_em import SchemeConfig


def timed(backend, n_paths, repeats):
    model, gen = builtin_example_sec5()
    cfg = SchemeConfig(1.0, 100, 1.0, 800)
    ens = EnsembleConfig(n_paths, 2.0, 42)
    best, curve = float("inf"), None
    for _ in range(repeats):
        start = time.perf_counter()
        curve = run_ensemble(model, cfg, ens, gen, 1, InitialSegment.constant(1.0), backend=backend,
                             retain=False).curve
        best = min(best, time.perf_counter() - start)
    return best, curve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--generic", action="store_true", help="also time the numpy stepping route")
    args = ap.parse_args()

    backends = ["python"]
    if kernels.COMPILED_AVAILABLE:
        backends.insert(0, "compiled")
    else:
        print("compiled kernel not built; timing the fallback only")
    if args.generic:
        backends.append("generic")

    results = {b: timed(b, args.paths, args.repeats) for b in backends}
    ref = results[backends[0]][1].values
    print(f"{'backend':<10} {'total s':>10} {'ms/path':>10} {'speedup':>9} {'max diff':>10}")
    slowest = max(t for t, _ in results.values())
    for b, (t, curve) in results.items():
        diff = float(np.max(np.abs(curve.values - ref)))
        print(f"{b:<10} {t:>10.3f} {1e3 * t / args.paths:>10.3f} {slowest / t:>8.1f}x {diff:>10.1e}")


if __name__ == "__main__":
    main()
