"""Compiled kernels versus the numpy fallback.

    python benchmarks/bench_kernels.py [--ell 51] [--repeat 3]

Times the two hot loops on inputs of production size and checks that both
backends agree.
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np

from sheetdce import _fallback
from sheetdce.coupling import build_period_table
from sheetdce.pulse import PulseProfile

try:
    from sheetdce import _kernels
except ImportError:
    _kernels = None

KP2 = 8 * math.pi**2


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def flat(out):
    parts = out if isinstance(out, tuple) else (out,)
    return np.concatenate([np.ravel(x) for x in parts])


def bench_roots(mod, ell, repeat):
    V = np.concatenate([[0.0], np.logspace(-3, 4, 2000)])
    return best_of(lambda: mod.phase_roots(V, 0.37, False, KP2, ell), repeat)


def bench_rk4(mod, ell, repeat, steps=2000):
    tab = build_period_table(PulseProfile(5000.0), 0.37, "TE", math.sqrt(KP2), ell, 2 * steps)
    P0 = np.hstack([np.eye(ell), np.zeros((ell, ell))])
    Q0 = np.hstack([np.zeros((ell, ell)), np.eye(ell)])
    h = tab.period / steps
    args = (tab.omega2, tab.coef, tab.ksq, tab.gain, h, 0, steps, steps)
    return best_of(lambda: mod.rk4_propagate(P0, Q0, *args), repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ell", type=int, default=51)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    for name, fn in (("phase_roots (2001 potentials)", bench_roots),
                     ("rk4_propagate (2000 steps)", bench_rk4)):
        t_py, out_py = fn(_fallback, args.ell, args.repeat)
        line = f"{name:32s} ell={args.ell:3d}  numpy {t_py * 1e3:9.1f} ms"
        if _kernels is not None:
            t_c, out_c = fn(_kernels, args.ell, args.repeat)
            a, b = flat(out_c), flat(out_py)
            diff = np.abs(a - b).max() / np.abs(b).max()
            line += f"  compiled {t_c * 1e3:9.1f} ms  speedup {t_py / t_c:5.1f}x  max rel diff {diff:.1e}"
        print(line)


if __name__ == "__main__":
    main()
