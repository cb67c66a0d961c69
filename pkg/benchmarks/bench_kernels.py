"""Compare the numba-compiled kernels with the pure-numpy fallback.

Each configuration runs in a fresh interpreter because the switch
(GPCERT_DISABLE_NUMBA) is read at import time.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _workloads():
    from gpcert.bnb import CertifyConfig, certify
    from gpcert.box import InputBox
    from gpcert.gp import Dataset, KernelParams, LikelihoodSpec, fit
    from gpcert.linalg import LpProblem, QpProblem, solve_convex_qp, solve_lp, sym_eigen

    rng = np.random.default_rng(0)
    B = rng.normal(size=(40, 40))
    sym = B @ B.T

    n, m = 30, 20
    A = rng.normal(size=(m, n))
    lp = LpProblem(rng.normal(size=n), A, A @ rng.uniform(0, 1, n) + 0.5, np.zeros(n), np.ones(n))

    k = 25
    R = rng.normal(size=(k, k))
    G = rng.normal(size=(15, k))
    qp = QpProblem(R @ R.T + np.eye(k), rng.normal(size=k), G, np.abs(rng.normal(size=15)),
                   -np.ones(k), np.ones(k))

    X = rng.normal(size=(25, 2))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=25) > 0, 1, 2)
    post = fit(Dataset(X, y, 2), KernelParams(1.5, np.array([1.0, 1.2])), LikelihoodSpec("probit"))
    box = InputBox.from_ball(np.array([0.1, -0.2]), 0.3)

    return {
        "jacobi_eigen_40": lambda: sym_eigen(sym, method="jacobi"),
        "simplex_20x30": lambda: solve_lp(lp),
        "dual_active_set_qp_25": lambda: solve_convex_qp(qp),
        "certify_probit_m25": lambda: certify(post, box, CertifyConfig(epsilon=0.01)),
    }


def run_child(repeat):
    from gpcert._jit import HAS_NUMBA

    out = {"numba": HAS_NUMBA}
    for name, fn in _workloads().items():
        fn()  # warm-up (compilation or cache load)
        ts = []
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            ts.append(time.perf_counter() - t0)
        out[name] = min(ts)
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        run_child(args.repeat)
        return
    results = {}
    for flag in ("0", "1"):
        env = dict(os.environ, GPCERT_DISABLE_NUMBA=flag)
        cmd = [sys.executable, __file__, "--child", "--repeat", str(args.repeat)]
        res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        results[flag] = json.loads(res.stdout.strip().splitlines()[-1])
    fast, slow = results["0"], results["1"]
    print(f"{'workload':28s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speed-up':>9s}")
    for name in fast:
        if name == "numba":
            continue
        print(f"{name:28s} {1e3 * fast[name]:12.3f} {1e3 * slow[name]:12.3f} {slow[name] / fast[name]:9.1f}x")
    if not fast["numba"]:
        print("note: numba unavailable, both columns use the numpy path")


if __name__ == "__main__":
    main()
