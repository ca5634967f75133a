"""Compare the compiled and pure-Python kernels.

Run with ``python3 benchmarks/bench_kernels.py``. Times the two hot
kernels (weighted PAVA and segment moments) and an end-to-end fit on each
available backend, and checks that both backends agree.
"""
import argparse
import timeit

import numpy as np

from logconcave import _backend
from logconcave.core import prepare_sample
from logconcave.solver import fit_mle


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def run(n=100_000, fit_n=5000, repeat=5):
    rng = np.random.default_rng(0)
    y = np.cumsum(rng.normal(size=n))
    w = rng.uniform(0.5, 2.0, size=n)
    a = rng.normal(size=n)
    b = a + rng.normal(scale=0.3, size=n)
    length = rng.uniform(0.01, 1.0, size=n)
    data = rng.gamma(2.0, size=fit_n)

    results = {}
    for name in _backend.available_backends():
        _backend.use_backend(name)
        results[name] = {
            "pava": _best(lambda: _backend.pava_decreasing(y, w), repeat),
            "moments": _best(lambda: _backend.segment_moments(a, b, length), repeat),
            "fit": _best(lambda: fit_mle(prepare_sample(data)), max(1, repeat // 2)),
            "out": (_backend.pava_decreasing(y, w), _backend.segment_moments(a, b, length)),
        }

    print(f"{'kernel':<22}" + "".join(f"{name:>12}" for name in results) + "    speedup")
    for key, label in (("pava", f"pava n={n}"), ("moments", f"moments n={n}"),
                       ("fit", f"fit n={fit_n}")):
        row = [results[name][key] for name in results]
        speed = (results["python"][key] / results["cython"][key]
                 if {"python", "cython"} <= results.keys() else float("nan"))
        print(f"{label:<22}" + "".join(f"{t * 1e3:10.2f}ms" for t in row) + f"  {speed:8.1f}x")

    if {"python", "cython"} <= results.keys():
        p_py, m_py = results["python"]["out"]
        p_c, m_c = results["cython"]["out"]
        dev = max(np.max(np.abs(p_py - p_c)),
                  max(np.max(np.abs(u - v) / np.maximum(np.abs(u), 1e-300))
                      for u, v in zip(m_py, m_c)))
        print(f"max backend disagreement: {dev:.2e}")
    _backend.use_backend(_backend.available_backends()[0])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--fit-n", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    run(args.n, args.fit_n, args.repeat)
