"""Time the compiled and pure-Python propagation kernels on the same state.

    python3 benchmarks/bench_kernels.py [--L 101] [--steps 2000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from danse import kernels
from danse.model import AbsorberSpec, absorber_profile


def make_inputs(L, W, seed=1):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=L) + 1j * rng.normal(size=L)
    c /= np.linalg.norm(c)
    v = rng.uniform(-W / 2, W / 2, L)
    a = absorber_profile(AbsorberSpec(), L)
    return c, v, a


def time_kernel(fn, c, v, a, g, dt, steps, repeat):
    best = np.inf
    for _ in range(repeat):
        cr, ci = c.real.copy(), c.imag.copy()
        t0 = time.perf_counter()
        fn(cr, ci, v, a, g, dt, steps)
        best = min(best, time.perf_counter() - t0)
    return best / steps, cr + 1j * ci


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--L", type=int, default=101)
    ap.add_argument("--W", type=float, default=4.0)
    ap.add_argument("--dt", type=float, default=0.02)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = {"python": kernels.get_backend("python")}
    try:
        backends["compiled"] = kernels.get_backend("compiled")
    except ImportError:
        print("compiled extension not built; timing the python fallback only")

    c, v, a = make_inputs(args.L, args.W)
    print(f"L={args.L} W={args.W} dt={args.dt} steps={args.steps} (best of {args.repeat})")
    print(f"{'integrator':>10} {'g':>6} {'backend':>9} {'us/step':>10} {'speedup':>8} {'max diff':>10}")
    for integ in ("split6", "split4", "rk4"):
        for g in (0.0, 10.0):
            res = {}
            for name, mod in backends.items():
                fn = getattr(mod, f"{integ}_advance")
                res[name] = time_kernel(fn, c, v, a, g, args.dt, args.steps, args.repeat)
            t_py = res["python"][0]
            for name, (t, out) in res.items():
                diff = np.max(np.abs(out - res["python"][1]))
                print(f"{integ:>10} {g:6g} {name:>9} {1e6 * t:10.3f} {t_py / t:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
