"""Compare the compiled and numpy kernel backends.

Times the fused normal-equation kernel on a typical 601-point spectrum and
on a long 100k-point one, then a complete dual-Lorentzian fit with each
backend.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from nvstrain import kernels
from nvstrain.fit import FitParams, fit_dual_lorentzian
from nvstrain.spectrum import SpectrumSamples

RAW = np.array([2.877, 2.862, 0.2, 0.1, 2e-3, 2e-3, 1.0])


def make_data(n, seed=0):
    rng = np.random.default_rng(seed)
    nu = np.linspace(2.84, 2.90, n)
    y = kernels.python_backend.dual_lorentzian(nu, RAW) + rng.normal(scale=0.01, size=n)
    return nu, y, np.ones(n)


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled backend not available; timing the numpy fallback only")

    rows = []
    for n, number in ((601, 2000), (100_000, 20)):
        nu, y, w = make_data(n)
        for name, k in backends.items():
            t = best_of(lambda: k.normal_equations(nu, y, w, RAW), args.repeat, number)
            rows.append((f"normal_equations n={n}", name, t))

    nu, y, _ = make_data(601, seed=1)
    samples = SpectrumSamples(nu, y)
    guess = FitParams(2.876, 2.863, 0.18, 0.12, 2.5e-3, 1.0)
    for name, k in backends.items():
        t = best_of(lambda: fit_dual_lorentzian(samples, guess, kernels=k), args.repeat, 50)
        rows.append(("full fit n=601", name, t))

    print(f"{'case':<28}{'backend':<10}{'time':>12}")
    base = {}
    for case, name, t in rows:
        base.setdefault(case, t)
        speedup = base[case] / t
        print(f"{case:<28}{name:<10}{t * 1e6:>10.1f} us  x{speedup:.1f}")


if __name__ == "__main__":
    main()
