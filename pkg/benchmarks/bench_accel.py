"""Compare the numba and numpy paths of the hot loops.

Each workload runs in a child process, once with numba enabled and once with
QENSEMBLE_DISABLE_NUMBA=1, so the switch is exercised exactly as users see it.
Timings exclude the first (compiling) call.

    python benchmarks/bench_accel.py [--repeat 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

WORKLOADS = ("nested_sum_N3", "nested_sum_N4", "density_N3_k1", "pfaffian_10")


def _workload(name):
    import numpy as np

    from qensemble import families as fm
    from qensemble import oracle as orc
    from qensemble._accel import pfaffian_kernel
    from qensemble.qcore import LatticePoint, QContext

    fam = fm.al_salam_carlitz(-1.0)
    ctx = QContext(0.25)
    if name == "nested_sum_N3":
        cfg = orc.OracleConfig(depth=60)
        return lambda: orc.brute_partition(fam, 3, cfg, ctx)
    if name == "nested_sum_N4":
        cfg = orc.OracleConfig(depth=24)
        return lambda: orc.brute_partition(fam, 4, cfg, ctx)
    if name == "density_N3_k1":
        cfg = orc.OracleConfig(pool_depth=40)
        pt = [LatticePoint(1.0, 2)]
        return lambda: orc.brute_density_sum(fam, 3, pt, cfg, ctx)
    rng = np.random.default_rng(0)
    mats = []
    for _ in range(200):
        X = rng.normal(size=(10, 10))
        mats.append(X - X.T)
    return lambda: [pfaffian_kernel(A) for A in mats]


def _child(name, repeat):
    fn = _workload(name)
    fn()  # warm-up and compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    print(json.dumps({"workload": name, "seconds": best}))


def _run(name, repeat, disable):
    env = dict(os.environ)
    env.pop("QENSEMBLE_DISABLE_NUMBA", None)
    if disable:
        env["QENSEMBLE_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, __file__, "--child", name, "--repeat", str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])["seconds"]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.child:
        _child(args.child, args.repeat)
        return
    print(f"{'workload':<16} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}")
    for name in WORKLOADS:
        fast = _run(name, args.repeat, disable=False)
        slow = _run(name, args.repeat, disable=True)
        print(f"{name:<16} {fast:>10.4f} {slow:>10.4f} {slow / fast:>8.1f}")


if __name__ == "__main__":
    main()
