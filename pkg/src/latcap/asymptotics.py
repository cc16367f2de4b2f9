"""Extrapolation of exact counts and related bounds.

``lz_fit`` fits consecutive ratios of exact counts by a rational function

    f(n+1)/f(n) = A (n^k + a_1 n^(k-1) + ... + a_k) / (n^k + b_1 n^(k-1) + ... + b_k)

at n = 1..2k+1.  The fit is linear in (A, A a_j, b_j) and is solved in exact
rationals.  If the fit holds for all n then f(n) ~ const A^n n^alpha with
alpha = a_1 - b_1.

The non-primitive bound counts triangulations of an n x n grid polygon built
from k-1 interior points per column, with entropy
h(x) = x ln 4 - x ln x - (1-x) ln(1-x) per unit area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import mpmath
from scipy import optimize

__all__ = [
    "LZFit",
    "FitError",
    "solve_rational",
    "lz_fit",
    "lz_series",
    "subexponential_check",
    "conjecture_bounds",
    "c3_reference",
    "np_lower_bound",
    "entropy",
    "entropy_max",
]


class FitError(ArithmeticError):
    """Singular interpolation system."""


@dataclass(frozen=True)
class LZFit:
    m: int | None
    k: int
    A: Fraction
    a: Tuple[Fraction, ...]
    b: Tuple[Fraction, ...]
    degenerate: int = 0      # dimension of the solution family (0: unique fit)

    @property
    def alpha(self) -> Fraction:
        return self.a[0] - self.b[0] if self.k else Fraction(0)

    @property
    def c_est(self):
        """(1/m) log2 A as an mpmath number (m = 1 if unknown)."""
        return mpmath.log(mpmath.mpf(self.A.numerator) / self.A.denominator, 2) / (self.m or 1)

    def ratio(self, n) -> Fraction:
        num = Fraction(n) ** self.k + sum(aj * Fraction(n) ** (self.k - j - 1) for j, aj in enumerate(self.a))
        den = Fraction(n) ** self.k + sum(bj * Fraction(n) ** (self.k - j - 1) for j, bj in enumerate(self.b))
        return self.A * num / den


def solve_rational(M: List[List[Fraction]], rhs: List[Fraction]):
    """Exact row reduction over the rationals.

    Returns (particular solution with free variables zero, null space basis).
    Raises FitError when the system is inconsistent.
    """
    rows, cols = len(M), len(M[0])
    A = [[Fraction(v) for v in row] + [Fraction(r)] for row, r in zip(M, rhs)]
    pivots = []
    r = 0
    for col in range(cols):
        piv = next((i for i in range(r, rows) if A[i][col] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        p = A[r][col]
        A[r] = [v / p for v in A[r]]
        for i in range(rows):
            if i != r and A[i][col] != 0:
                f = A[i][col]
                A[i] = [v - f * w for v, w in zip(A[i], A[r])]
        pivots.append(col)
        r += 1
        if r == rows:
            break
    if any(all(v == 0 for v in A[i][:cols]) and A[i][cols] != 0 for i in range(rows)):
        raise FitError("inconsistent interpolation system")
    x = [Fraction(0)] * cols
    for i, col in enumerate(pivots):
        x[col] = A[i][cols]
    free = [c for c in range(cols) if c not in pivots]
    null = []
    for fcol in free:
        v = [Fraction(0)] * cols
        v[fcol] = Fraction(1)
        for i, col in enumerate(pivots):
            v[col] = -A[i][fcol]
        null.append(v)
    return x, null


def lz_fit(values: Sequence[int], k: int, m: int | None = None) -> LZFit:
    """Fit from f(1), ..., f(2k+2) (``values[0]`` is f(1)).

    When the ratios are matched by a lower-degree rational function the
    system is singular; the fit is still returned if A and alpha are the same
    for every solution (free parameters are set to zero), otherwise FitError.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if len(values) < 2 * k + 2:
        raise ValueError(f"need {2 * k + 2} values, got {len(values)}")
    if any(v == 0 for v in values[: 2 * k + 2]):
        raise ValueError("values must be nonzero")
    ratios = [Fraction(values[n]) / values[n - 1] for n in range(1, 2 * k + 2)]   # f(n+1)/f(n), n = 1..2k+1
    rows, rhs = [], []
    for n, r in enumerate(ratios, start=1):
        N = Fraction(n)
        # unknowns: A, A a_1..A a_k, b_1..b_k
        row = [N ** k] + [N ** (k - j) for j in range(1, k + 1)] + [-r * N ** (k - j) for j in range(1, k + 1)]
        rows.append(row)
        rhs.append(r * N ** k)
    sol, null = solve_rational(rows, rhs)
    A = sol[0]
    if A == 0:
        raise FitError("fitted growth ratio is zero")
    for v in null:
        # A and alpha = (A a_1)/A - b_1 must not move along the null space
        if v[0] != 0 or (k and v[1] / A - v[k + 1] != 0):
            raise FitError("singular interpolation system: growth parameters not determined")
    a = tuple(v / A for v in sol[1: k + 1])
    b = tuple(sol[k + 1:])
    return LZFit(m, k, A, a, b, len(null))


def lz_series(values: Sequence[int], ks: Sequence[int], m: int | None = None) -> Dict[int, LZFit | FitError]:
    """Fits for several k; singular cases are kept as FitError entries."""
    out: Dict[int, LZFit | FitError] = {}
    for k in ks:
        try:
            out[k] = lz_fit(values, k, m)
        except FitError as e:
            out[k] = e
    return out


def subexponential_check(fits: Dict[int, LZFit | FitError]) -> dict:
    """alpha + 1/2 by k and whether its magnitude shrinks."""
    rows = []
    for k in sorted(fits):
        f = fits[k]
        if isinstance(f, FitError):
            rows.append((k, None))
        elif f.k > 0:
            rows.append((k, f.alpha + Fraction(1, 2)))
    devs = [abs(d) for _, d in rows if d is not None]
    steps = list(zip(devs, devs[1:]))
    decreasing = sum(1 for a, b in steps if b <= a)
    return {"rows": rows, "decreasing_steps": decreasing, "steps": len(steps),
            "trend": "decreasing" if steps and decreasing * 2 > len(steps) else "not decreasing"}


def conjecture_bounds(capacities: Dict[int, object]) -> List[Tuple[int, object]]:
    """(m, (m+1) c_{m+1} - m c_m) for consecutive widths with known c."""
    out = []
    for m in sorted(capacities):
        if m + 1 in capacities:
            out.append((m, (m + 1) * mpmath.mpf(capacities[m + 1]) - m * mpmath.mpf(capacities[m])))
    return out


def c3_reference(c2, c4, d32: str = "2.14641", d43: str = "2.16413") -> Tuple[object, object]:
    """c_3 recovered from the published rounded differences 3c3-2c2 and 4c4-3c3.

    Returns (mean estimate, half the disagreement between the two routes).
    """
    a = (mpmath.mpf(d32) + 2 * mpmath.mpf(c2)) / 3
    b = (4 * mpmath.mpf(c4) - mpmath.mpf(d43)) / 3
    return (a + b) / 2, abs(a - b) / 2


# --------------------------------------------------------------------------
# non-primitive triangulations

def np_lower_bound(n: int, k: int) -> Tuple[int, float]:
    """binom(n, k-1)^(n+1) binom(2k, k)^n and its log divided by n^2."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    count = math.comb(n, k - 1) ** (n + 1) * math.comb(2 * k, k) ** n
    return count, float(mpmath.log(count)) / n ** 2


def entropy(x: float) -> float:
    """h(x) = x ln 4 - x ln x - (1 - x) ln(1 - x) on [0, 1]."""
    if not 0 <= x <= 1:
        raise ValueError("x must lie in [0, 1]")
    t1 = x * math.log(x) if x > 0 else 0.0
    t2 = (1 - x) * math.log(1 - x) if x < 1 else 0.0
    return x * math.log(4) - t1 - t2


def entropy_max() -> Tuple[float, float]:
    """(argmax, max) of h from the zero of h'(x) = ln 4 - ln x + ln(1 - x)."""
    dh = lambda x: math.log(4) - math.log(x) + math.log1p(-x)
    x = optimize.brentq(dh, 0.5, 1 - 1e-12, xtol=1e-15, rtol=1e-15)
    return x, entropy(x)
