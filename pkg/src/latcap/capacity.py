"""Growth constants of strip triangulations.

The constant c_m is lim log2 f(m,n) / (mn).  Widths 1 and 2 have closed
forms.  For widths 4 and 5 the limit is read off the first positive root
beta of J(beta) = 1, respectively det(I - L(beta)) = 0, where J and L are the
trapezoid generating functions evaluated by the Nystroem solver:

    c_4 = -(1/2) log2 beta_4,      c_5 = -(2/5) log2 beta_5.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import mpmath
import numpy as np

from .nystrom import PrecisionConfig, eval_J, eval_Lmatrix
from .quadrature import NodeGrid, make_grid

__all__ = [
    "CapacityResult",
    "RootError",
    "closed_forms",
    "capacity_from_beta",
    "find_beta4",
    "find_beta5",
    "beta_from_series",
    "common_digits",
    "convergence_study",
    "BETA4_PLUS",
]

BETA4_PLUS = 0.05414


class RootError(ArithmeticError):
    """No sign change of the defining function in the search interval."""


@dataclass
class CapacityResult:
    m: int
    beta: Tuple[object, object]
    c: object
    c_err: float
    method: str
    provenance: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.beta
        if not lo < hi:
            raise ValueError("beta bracket must satisfy lo < hi")

    @property
    def beta_mid(self):
        lo, hi = self.beta
        return (lo + hi) / 2

    @property
    def growth(self):
        """lim f(m,n)^(1/(mn)) = 2^c."""
        return mpmath.power(2, mpmath.mpf(self.c))

    def c_str(self, digits: int = 25) -> str:
        return mpmath.nstr(mpmath.mpf(self.c), digits, strip_zeros=False)


def capacity_from_beta(beta, m: int):
    """c_m = -(2/m) log2 beta, evaluated in mpmath."""
    beta = mpmath.mpf(beta)
    if beta <= 0:
        raise ValueError("beta must be positive")
    return -mpmath.mpf(2) / m * mpmath.log(beta, 2)


def closed_forms() -> Dict[int, object]:
    """c_1 = 2 and c_2 = (1/2) log2((611 + sqrt 73) / 36)."""
    with mpmath.workdps(40):
        c2 = mpmath.log((611 + mpmath.sqrt(73)) / 36, 2) / 2
    return {1: mpmath.mpf(2), 2: c2}


def common_digits(a, b) -> int:
    """Number of leading significant decimal digits shared by a and b."""
    with mpmath.workdps(40):     # parse decimal strings without rounding to double
        a, b = (mpmath.mpf(str(v) if isinstance(v, np.floating) else v) for v in (a, b))
        if a == b:
            return 30
        if a == 0 or b == 0:
            return 0
        rel = abs(a - b) / abs(a)
        return max(0, int(mpmath.floor(-mpmath.log10(rel))))


# --------------------------------------------------------------------------
# root search

def _to_ld(y) -> np.longdouble:
    return np.longdouble(mpmath.nstr(mpmath.mpf(y), 25))


def _first_crossing(fun: Callable, lo: float, hi: float, steps: int = 8, min_step: float = 1e-9):
    """Bracket the first zero of an increasing function before a singularity.

    ``fun(y)`` returns (value, level) where value increases through zero and
    level grows monotonically until the singularity; a drop in level means a
    step jumped past the singularity, and the step is halved.
    """
    v0, l0 = fun(lo)
    if v0 >= 0:
        raise RootError(f"defining function already non-negative at {lo}")
    x, vx, lx = lo, v0, l0
    h = (hi - lo) / steps
    while h >= min_step * max(1.0, abs(hi)):
        y = min(x + h, hi)
        v, lev = fun(y)
        if not (np.isfinite(v) and np.isfinite(lev)) or lev < lx:
            h /= 2
            continue
        if v >= 0:
            return (x, y), (vx, v)
        if y >= hi:
            break
        x, vx, lx = y, v, lev
    raise RootError(f"no sign change in [{lo}, {hi}]")


def _polish(fun: Callable, lo, hi, tol: float = 1e-20, maxsteps: int = 60):
    """Anderson-Bjoerck root inside a sign-changing bracket, in mpmath."""
    with mpmath.workdps(30):
        f = lambda y: mpmath.mpf(str(fun(_to_ld(y))[0]))
        r = mpmath.findroot(f, (mpmath.mpf(lo), mpmath.mpf(hi)), solver="anderson", tol=tol,
                            maxsteps=maxsteps, verify=False)
    return r


def _certify(fun: Callable, r, rel0: float = 1e-18, tries: int = 24):
    """Smallest bracket [r(1-e), r(1+e)] with a sign change, e doubling."""
    e = rel0
    with mpmath.workdps(30):
        r = mpmath.mpf(r)
        for _ in range(tries):
            lo, hi = r * (1 - e), r * (1 + e)
            vlo, vhi = fun(_to_ld(lo))[0], fun(_to_ld(hi))[0]
            if vlo < 0 <= vhi:
                return lo, hi
            e *= 2
    raise RootError("could not certify a sign change around the root")


def _y_to_x(y, m):
    return np.longdouble(y) ** (np.longdouble(1) / m)


def find_beta4(grid: NodeGrid | None = None, prec: PrecisionConfig | None = None,
               bracket: Tuple[float, float] = (0.04, BETA4_PLUS), tol: float = 1e-20) -> CapacityResult:
    """First root of J(beta) = 1 with J from the discrete width-4 solve."""
    grid = make_grid(64, 1 / 3, True) if grid is None else grid
    prec = PrecisionConfig() if prec is None else prec
    cache: Dict[object, tuple] = {}
    t0 = time.perf_counter()

    def fun(y):
        key = str(y)
        if key not in cache:
            J = eval_J(_y_to_x(y, 4), grid, prec)
            cache[key] = (J - 1, J)
        return cache[key]

    (lo, hi), _ = _first_crossing(fun, *bracket)
    r = _polish(fun, lo, hi, tol)
    lo, hi = _certify(fun, r)
    return _result(4, lo, hi, grid, prec, len(cache), time.perf_counter() - t0)


def find_beta5(grid: NodeGrid | None = None, prec: PrecisionConfig | None = None,
               bracket: Tuple[float, float] = (0.02, 0.03), tol: float = 1e-17) -> CapacityResult:
    """First root of det(I - L(beta)) = 0 with L from the width-5 solves.

    The bracket is widened once when it shows no sign change.  Grids below
    about 12 nodes do not resolve the singularity of L and give no root.
    """
    grid = make_grid(16, 1 / 3, True) if grid is None else grid
    prec = PrecisionConfig(refine_digits=16) if prec is None else prec
    cache: Dict[object, tuple] = {}
    t0 = time.perf_counter()

    def fun(y):
        key = str(y)
        if key not in cache:
            L = eval_Lmatrix(_y_to_x(y, 5), grid, prec)
            cache[key] = (-np.linalg.det(np.eye(2) - L.astype(np.float64)), float(np.trace(L)))
        return cache[key]

    try:
        (lo, hi), _ = _first_crossing(fun, *bracket)
    except RootError:
        # one retry on a wider interval, still inside x < 1/2
        wide = (bracket[0] / 2, (bracket[1] + 0.5 ** 5) / 2)
        (lo, hi), _ = _first_crossing(fun, *wide)
    r = _polish(fun, lo, hi, tol)
    lo, hi = _certify(fun, r, rel0=1e-15)
    return _result(5, lo, hi, grid, prec, len(cache), time.perf_counter() - t0)


def _result(m, lo, hi, grid, prec, nevals, seconds) -> CapacityResult:
    with mpmath.workdps(30):
        c = capacity_from_beta((lo + hi) / 2, m)
        c_err = float(abs(capacity_from_beta(lo, m) - capacity_from_beta(hi, m)) / 2)
    prov = {"n": grid.n, "b": grid.b, "quarter_shift": grid.quarter_shift,
            "base_digits": prec.base_digits, "refine_digits": prec.refine_digits,
            "evaluations": nevals, "seconds": round(seconds, 2)}
    return CapacityResult(m, (lo, hi), c, c_err, "nystrom", prov)


def beta_from_series(coeffs: Dict[int, int] | Sequence[int], m: int = 4) -> CapacityResult:
    """Root of the truncated series sum_k a_k y^k = 1 (a lower bound for width-4 J).

    With non-negative coefficients the truncation underestimates J, so the
    root lies above the true beta and c is a lower bound.
    """
    if not isinstance(coeffs, dict):
        coeffs = dict(enumerate(coeffs))
    with mpmath.workdps(30):
        f = lambda y: sum(mpmath.mpf(c) * y ** k for k, c in coeffs.items()) - 1
        hi = mpmath.mpf(2) ** -20
        while f(hi) < 0:
            hi *= 2
        r = mpmath.findroot(f, (hi / 2, hi), solver="anderson")
        lo, hi = r * (1 - mpmath.mpf(10) ** -25), r * (1 + mpmath.mpf(10) ** -25)
        c = capacity_from_beta(r, m)
    return CapacityResult(m, (lo, hi), c, 0.0, "series", {"terms": len(coeffs)})


def convergence_study(m: int, ns: Sequence[int], b: float = 1 / 3, shift: bool = True,
                      prec: PrecisionConfig | None = None) -> List[dict]:
    """Capacity at increasing node counts with the digits shared by neighbours."""
    rows: List[dict] = []
    prev = None
    for n in ns:
        g = make_grid(n, b, shift)
        res = find_beta4(g, prec) if m == 4 else find_beta5(g, prec)
        row = {"n": n, "beta": res.beta_mid, "c": res.c, "c_err": res.c_err,
               "seconds": res.provenance["seconds"], "result": res}
        row["stable_digits"] = common_digits(prev.c, res.c) if prev is not None else 0
        rows.append(row)
        prev = res
    return rows
