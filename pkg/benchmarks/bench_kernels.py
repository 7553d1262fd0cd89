"""Compare the compiled kernels with the pure-Python reference.

Each kernel runs a fixed amount of work (tolerances are set so the iterative
kernels use their whole budget) and the best of several repeats is reported.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""
import argparse
import math
import timeit

import numpy as np

from coherelab import _kernels
from coherelab import dictionary as dct
from coherelab.coherence import _offdiag_moduli
from coherelab.solvers import lipschitz


def _cases(quick):
    return _problem(dct.dirac_hadamard(64), quick) + _problem(dct.dirac_hadamard(8), quick)


def _problem(D, quick):
    A = np.ascontiguousarray(D.matrix)
    AH = np.ascontiguousarray(A.T)
    rng = np.random.default_rng(0)
    x0 = np.zeros(D.n)
    x0[rng.permutation(D.n)[:2]] = rng.standard_normal(2)
    b = A @ x0 + 0.01 * rng.standard_normal(D.m)
    n = D.n
    iters = 200 if quick else 2000
    moduli = _offdiag_moduli(D)
    step = 1.0 / lipschitz(A)
    pd = 0.99 / math.sqrt(lipschitz(A))
    zero = np.zeros(n)

    def profile(k):
        return lambda: k.profile_from_moduli(moduli, D.n // 4)

    def fista(k):
        return lambda: k.fista_lasso(A, AH, b, 1e-3, step, zero, iters, 0.0, False)

    def pdhg(k):
        return lambda: k.pdhg_l1(A, AH, b, 0.05, 1, pd, pd, zero, iters, 0.0, 50)

    shape = f"{D.m}x{D.n}"
    return [
        (f"profile  {shape}, s_max={D.n // 4}", profile),
        (f"fista    {shape}, {iters} iterations", fista),
        (f"pdhg     {shape} l2 ball, {iters} iterations", pdhg),
    ]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--quick", action="store_true", help="smaller iteration budgets")
    args = p.parse_args(argv)
    if _kernels.fast is None:
        print("compiled backend not available; only the reference timings are shown")
    print(f"{'kernel':<44}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, make in _cases(args.quick):
        t_ref = min(timeit.repeat(make(_kernels.reference), number=1, repeat=args.repeat))
        if _kernels.fast is None:
            print(f"{name:<44}{t_ref:>12.4f}{'-':>12}{'-':>10}")
            continue
        t_fast = min(timeit.repeat(make(_kernels.fast), number=1, repeat=args.repeat))
        print(f"{name:<44}{t_ref:>12.4f}{t_fast:>12.4f}{t_ref / t_fast:>9.1f}x")


if __name__ == "__main__":
    main()
