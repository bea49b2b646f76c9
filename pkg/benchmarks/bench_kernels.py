"""Compare the compiled kernels with the pure-Python fallback.

Run from the repository root after ``pip install -e .``:

    python benchmarks/bench_kernels.py [--repeat N]

Prints one line per workload with the median wall time of each backend and
the speed-up of the compiled one. Workloads are micro calls to each kernel
plus two end-to-end jobs (an LP relaxation and exhaustive policy search).
"""

import argparse
import statistics
import time

import numpy as np

from pomdp_lp import kernels
from pomdp_lp.lp import solve_lp
from pomdp_lp.model import generate_random_instance
from pomdp_lp.oracle import brute_force_memoryless
from pomdp_lp.pomdp_milp import build_pomdp_milp


def _median_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def micro_workloads(rng):
    n, m = 4000, 600
    d = rng.normal(size=n)
    status = rng.choice([0, 1, 2], size=n).astype(np.int8)
    x_b = rng.uniform(0, 1, size=m)
    lb_b = np.zeros(m)
    ub_b = np.where(rng.random(m) < 0.5, 1.0, np.inf)
    alpha = rng.normal(size=m)
    basis = np.arange(m, dtype=np.intp)
    alpha_row = rng.normal(size=n)
    rows = rng.integers(0, m, size=40).astype(np.intp)
    etas = rng.normal(size=(40, m))
    etas[np.arange(40), rows] += 5.0
    v = rng.normal(size=m)

    def loop(call, k=200):
        return lambda kern: [call(kern) for _ in range(k)]

    return {
        "select_entering x200": loop(lambda k: k.select_entering(d, status, 1e-9, False)),
        "ratio_test x200": loop(lambda k: k.ratio_test(x_b, lb_b, ub_b, alpha, 1.0, False,
                                                       1e-9, 1e-9, False, basis)),
        "dual_ratio_test x200": loop(lambda k: k.dual_ratio_test(alpha_row, d, status, 1.0,
                                                                 1e-9, 1e-9)),
        "eta_ftran x200": loop(lambda k: k.eta_ftran(v.copy(), rows, etas, 40)),
        "eta_btran x200": loop(lambda k: k.eta_btran(v.copy(), rows, etas, 40)),
    }


def end_to_end_workloads():
    inst = generate_random_instance(3, 3, 3, 3, 6)
    relax = build_pomdp_milp(inst, with_cuts=True)[0].base
    small = generate_random_instance(1, 3, 3, 2, 4)

    def lp_job(kern):
        kernels.active = kern
        solve_lp(relax)

    def oracle_job(kern):
        brute_force_memoryless(small, kern=kern)

    return {"LP relaxation 3/3/3 T=6 with cuts": lp_job,
            "brute force 3/3/2 T=4": oracle_job}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels not built; only the Python fallback is available")
    rng = np.random.default_rng(0)
    jobs = {**micro_workloads(rng), **end_to_end_workloads()}
    saved = kernels.active
    width = max(len(name) for name in jobs)
    print(f"{'workload':<{width}}  " + "  ".join(f"{b:>10}" for b in backends) + "   speed-up")
    try:
        for name, job in jobs.items():
            times = {b: _median_time(lambda: job(k), args.repeat) for b, k in backends.items()}
            cells = "  ".join(f"{times[b] * 1e3:>8.2f}ms" for b in backends)
            ratio = (f"{times['python'] / times['compiled']:>8.1f}x"
                     if "compiled" in times else "")
            print(f"{name:<{width}}  {cells}  {ratio}")
    finally:
        kernels.active = saved


if __name__ == "__main__":
    main()
