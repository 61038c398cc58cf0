"""Compare the numba and numpy minor-recursion kernels.

Times ``corner_log_det`` (the inner loop of every transmission and current
evaluation) for several frequency batch sizes and chain lengths, and checks
that both paths agree. Adaptive quadrature calls the kernel with small
batches (15 nodes per active panel), where the per-site overhead of the
numpy loop dominates; large batches narrow the gap.

    python benchmarks/bench_kernels.py --freqs 15 240 4000 --sizes 256 1024 4096
"""

import argparse
import time

import numpy as np

from nonrecip import _kernels
from nonrecip.model import ModelParams, gamma_of_z, hoppings_from_gamma


def inputs(p, omega):
    gam = gamma_of_z(p, None, omega.astype(complex))
    tp, tm = hoppings_from_gamma(p, gam)
    bulk = omega - p.delta_c + 1j * gam
    end = bulk + 0.5j * p.gamma
    return end, bulk, end, tp * tm


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--freqs", type=int, nargs="+", default=[15, 240, 4000])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable (or disabled); only the numpy path will run")
    p = ModelParams()
    if _kernels.HAVE_NUMBA:
        # compile once outside the timed region
        args4 = inputs(p, np.linspace(-1.0, 1.0, 2))
        _kernels.corner_log_det(*args4, 4, use_numba=True)

    print(f"{'freqs':>6} {'N':>6} {'numpy [s]':>11} {'numba [s]':>11} {'speedup':>8} {'max |dlog|':>11}")
    for m in args.freqs:
        a_first, a_bulk, a_last, prod = inputs(p, np.linspace(-4.0, 4.0, m))
        for n in args.sizes:
            t_np, (ld_np, _) = best_of(
                lambda: _kernels.corner_log_det(a_first, a_bulk, a_last, prod, n, use_numba=False), args.repeat
            )
            if not _kernels.HAVE_NUMBA:
                print(f"{m:>6} {n:>6} {t_np:>11.5f} {'-':>11} {'-':>8} {'-':>11}")
                continue
            t_nb, (ld_nb, _) = best_of(
                lambda: _kernels.corner_log_det(a_first, a_bulk, a_last, prod, n, use_numba=True), args.repeat
            )
            diff = np.max(np.abs(ld_np.real - ld_nb.real))
            print(f"{m:>6} {n:>6} {t_np:>11.5f} {t_nb:>11.5f} {t_np / t_nb:>8.1f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
