"""Compare the compiled kernels with the pure-Python/numpy fallbacks.

    python benchmarks/bench_kernel.py [--jobs 100000] [--repeat 3]

Times the event loop on one pre-drawn input and the CK balance sweep on one
grid, checks that both backends agree, and prints a small table.
"""
import argparse
import time

import numpy as np

from forkjoin import ck
from forkjoin.des import available_backends, simulate_from_times
from forkjoin.params import NetworkParams
from forkjoin.rng import RngStream, generate_arrival_times


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def bench_des(jobs, repeat):
    p = NetworkParams.from_loads(1.5, 3, 5, 0.8, 0.6)
    arr = generate_arrival_times(p.lam, jobs, RngStream(0, "arrivals"))
    sa = RngStream(0, "service-a").exponentials(p.mu_a, jobs)
    sb = RngStream(0, "service-b").exponentials(p.mu_b, jobs)
    rows, outs = [], {}
    for b in available_backends():
        t, outs[b] = best_of(lambda: simulate_from_times(arr, sa, sb, p.n_a, p.n_b, jobs // 10, backend=b), repeat)
        rows.append((f"des ({jobs} jobs)", b, t))
    ref = next(iter(outs.values()))
    agree = all(np.array_equal(o.out_trace, ref.out_trace) for o in outs.values())
    return rows, agree


def bench_ck(q_max, repeat):
    p = NetworkParams.from_loads(1.0, 1, 1, 0.8, 0.7)
    backends = ["numpy"] + (["compiled"] if ck.SWEEP_BACKEND == "compiled" else [])
    rows, grids = [], {}
    for b in backends:
        t, grids[b] = best_of(lambda: ck.solve_stationary(p, q_max=q_max, boundary_budget=None, backend=b), repeat)
        rows.append((f"ck sweep (q_max={q_max})", b, t))
    ref = next(iter(grids.values()))
    agree = all(np.max(np.abs(g.probs - ref.probs)) < 1e-10 for g in grids.values())
    return rows, agree


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--jobs", type=int, default=100_000)
    ap.add_argument("--q-max", type=int, default=120)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    des_rows, des_ok = bench_des(args.jobs, args.repeat)
    ck_rows, ck_ok = bench_ck(args.q_max, args.repeat)
    print(f"{'kernel':<26}{'backend':<10}{'seconds':>10}")
    for name, backend, t in des_rows + ck_rows:
        print(f"{name:<26}{backend:<10}{t:>10.4f}")
    for rows in (des_rows, ck_rows):
        t = {backend: sec for _, backend, sec in rows}
        if "compiled" in t and len(t) == 2:
            fallback = next(b for b in t if b != "compiled")
            print(f"{rows[0][0]}: compiled is {t[fallback] / t['compiled']:.1f}x faster than {fallback}")
    print(f"des outputs identical: {des_ok}; ck grids agree: {ck_ok}")


if __name__ == "__main__":
    main()
