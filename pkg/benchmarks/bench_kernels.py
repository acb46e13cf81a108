"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from iscc import _fallback
from iscc.sensing import (AlphaModel, SensingParams, class_arrays, cnn_accuracy,
                          default_class_set)

try:
    from iscc import _kernels
except ImportError:  # extension not built
    _kernels = None


def workloads():
    cs, sp = default_class_set(), SensingParams()
    fs = np.arange(1.0, 3001.0)  # one exhaustive sweep over sampling rates
    mu, sig = class_arrays(cs, sp, fs)
    alpha = cnn_accuracy(AlphaModel(), fs)
    coef = sp.c_s * sp.k_sub * sp.t_win * fs / 1e11
    p = cs.priors
    m0, s0 = mu[100], sig[100]
    etas = np.linspace(0.0, m0[1:].min(), 1000)
    return {
        "accuracy x1000": lambda k: [k.accuracy(e, m0, s0, p, 0.9) for e in etas],
        "select x1": lambda k: k.select(m0, s0, p, 0.9, float(coef[100]), sp.t_sense_max, 8,
                                        1e-6, 200),
        "select_many x3000": lambda k: k.select_many(mu, sig, p, alpha, coef, sp.t_sense_max,
                                                     8, 1e-6, 200),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = [("python", _fallback)] + ([("compiled", _kernels)] if _kernels else [])
    print(f"{'workload':<20}" + "".join(f"{n:>12}" for n, _ in backends) + "   speedup")
    for name, fn in workloads().items():
        times = [min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
                 for _, mod in backends]
        speed = f"{times[0] / times[1]:9.1f}x" if len(times) == 2 else "         -"
        print(f"{name:<20}" + "".join(f"{t:11.4f}s" for t in times) + speed)


if __name__ == "__main__":
    main()
