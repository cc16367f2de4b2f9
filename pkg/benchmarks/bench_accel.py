"""Timing of the compiled and numpy versions of the solver hot loops.

Usage: python3 benchmarks/bench_accel.py [n ...]

Each kernel is run once to trigger compilation, then timed as the best of
several repeats.  The two versions must agree to roundoff.
"""

import sys
import time

import numpy as np

from latcap import _accel
from latcap.kernels import kernel_polys
from latcap.nystrom import assemble_width4
from latcap.quadrature import make_grid


def best_of(fn, repeats=5):
    fn()
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n, x=0.45):
    g = make_grid(n, 1 / 3, True)
    pt = kernel_polys(4)["q"]
    S = assemble_width4(x, g, np.complex128)
    rng = np.random.default_rng(0)
    g1 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    g2 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h3 = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    rows = []
    exps = np.ascontiguousarray(pt.exps[:, :3])
    q_nb = _accel.q_tensor4(pt, x, g.nodes)
    q_np = _accel._q_tensor_numpy(pt.xexp, exps, pt.coef, x, g.nodes)
    err = np.max(np.abs(q_nb - q_np)) / np.max(np.abs(q_np))
    t_nb = best_of(lambda: _accel.q_tensor4(pt, x, g.nodes))
    t_np = best_of(lambda: _accel._q_tensor_numpy(pt.xexp, exps, pt.coef, x, g.nodes))
    rows.append(("q_tensor4", n, t_np, t_nb, err))

    args = (S.psi1, S.psi2, S.psi3, S.A1, S.B1, S.C1, S.A2, S.B2, S.C2, S.D3, S.E3, g1, g2, h3)
    y_nb = _accel._width4_numba(*args)
    y_np = _accel._width4_numpy(S, g1, g2, h3)
    err = max(np.max(np.abs(a - b)) / np.max(np.abs(b)) for a, b in zip(y_nb, y_np))
    t_nb = best_of(lambda: _accel._width4_numba(*args))
    t_np = best_of(lambda: _accel._width4_numpy(S, g1, g2, h3))
    rows.append(("width4_apply", n, t_np, t_nb, err))
    return rows


def main(argv):
    if not _accel.HAVE_NUMBA:
        print("numba not available")
        return 1
    ns = [int(a) for a in argv] or [32, 64, 96]
    print(f"{'kernel':14s} {'n':>4s} {'numpy [s]':>11s} {'numba [s]':>11s} {'speedup':>8s} {'rel diff':>9s}")
    for n in ns:
        for name, n, t_np, t_nb, err in bench(n):
            print(f"{name:14s} {n:4d} {t_np:11.5f} {t_nb:11.5f} {t_np / t_nb:8.2f} {err:9.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
