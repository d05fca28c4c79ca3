"""Compare the compiled and numpy stepping kernels.

    python3 benchmarks/bench_kernel.py --N 100 200 400 --steps 2000
"""
import argparse
import time

import numpy as np

from cpnflow.flow import init_twist
from cpnflow.flow import kernel


def time_kernel(name, state, dt, steps, repeat):
    adv = kernel.get_advance(name)
    best = np.inf
    for _ in range(repeat):
        T, g = state.Theta.copy(), state.g.copy()
        t0 = time.perf_counter()
        status, done = adv(state.theta_grid, T, g, dt, steps)
        best = min(best, time.perf_counter() - t0)
        if status != kernel.OK or done != steps:
            raise RuntimeError(f"{name}: {kernel.STATUS_TEXT[status]} after {done} steps")
    return best / steps, np.concatenate([T, g])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, nargs="+", default=[100, 200, 400])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--amplitude", type=float, default=0.3)
    args = ap.parse_args(argv)

    names = kernel.available()
    print(f"kernels: {', '.join(names)}  (selected at import: {kernel.KERNEL_NAME})")
    print(f"{'N':>5} " + " ".join(f"{n + ' us/step':>16}" for n in names) + f" {'speedup':>8} {'max diff':>10}")
    for N in args.N:
        s = init_twist(N, "smooth_twist", args.amplitude)
        dt = 0.1 * s.dtheta ** 2
        per, out = {}, {}
        for name in names:
            per[name], out[name] = time_kernel(name, s, dt, args.steps, args.repeat)
        cols = " ".join(f"{1e6 * per[n]:16.2f}" for n in names)
        if len(names) > 1:
            speed = per["python"] / per["cython"]
            diff = float(np.max(np.abs(out["python"] - out["cython"])))
            print(f"{N:5d} {cols} {speed:8.1f} {diff:10.2e}")
        else:
            print(f"{N:5d} {cols} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
