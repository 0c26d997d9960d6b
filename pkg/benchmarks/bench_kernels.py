"""Time the compiled hot kernels against the numpy fallback.

Runs each kernel on representative shapes with both backends and prints
the per-call time and speedup. Usage:

    python benchmarks/bench_kernels.py [--n 20000] [--d 8] [--k 25] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from ddsmc._kernels import _numpy

try:
    from ddsmc._kernels import _core
except ImportError:
    _core = None


def make_cases(n, d, k, rng):
    x = np.ascontiguousarray(rng.standard_normal((n, d)))
    means = np.ascontiguousarray(rng.standard_normal((k, d)))
    log_w = np.ascontiguousarray(np.log(rng.dirichlet(np.ones(k))))
    mean = np.ascontiguousarray(rng.standard_normal((n, d)))
    var = np.ascontiguousarray(rng.uniform(0.5, 2.0, d))
    a = np.sort(rng.standard_normal(n))
    b = np.sort(rng.standard_normal(n))
    return [
        ("gmm_score", lambda m: m.gmm_score(x, means, log_w, 8.0, 1.0)),
        ("gmm_logpdf", lambda m: m.gmm_logpdf(x, means, log_w, 8.0, 1.0)),
        ("diag_logpdf", lambda m: m.diag_logpdf(x, mean, var)),
        ("w2sq_1d", lambda m: m.w2sq_1d(a, b)),
    ]


def best_ms(fn, repeat):
    loops = max(1, int(0.02 / max(timeit.timeit(fn, number=1), 1e-9)))
    times = timeit.repeat(fn, number=loops, repeat=repeat)
    return 1e3 * min(times) / loops


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20000, help="evaluation points")
    ap.add_argument("--d", type=int, default=8, help="dimension")
    ap.add_argument("--k", type=int, default=25, help="mixture components")
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = make_cases(args.n, args.d, args.k, rng)

    print(f"n={args.n} d={args.d} k={args.k}")
    header = f"{'kernel':<14} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_np = best_ms(lambda: call(_numpy), args.repeat)
        if _core is None:
            print(f"{name:<14} {t_np:>10.3f} {'n/a':>12} {'n/a':>8}")
            continue
        ref = np.asarray(call(_numpy))
        got = np.asarray(call(_core))
        if not np.allclose(got, ref, rtol=1e-10, atol=1e-12):
            raise AssertionError(f"{name}: backends disagree")
        t_c = best_ms(lambda: call(_core), args.repeat)
        print(f"{name:<14} {t_np:>10.3f} {t_c:>12.3f} {t_np / t_c:>7.1f}x")
    if _core is None:
        print("compiled extension not importable; numpy fallback only")


if __name__ == "__main__":
    main()
