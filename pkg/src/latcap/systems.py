"""Order-by-order solution of the width-4 and width-5 shape recurrences.

Every unknown series U satisfies an equation

    U = S + sum_terms K * cf(U_j(args))

where K is a known series with positive x-valuation, U_j(args) renames the
arguments of another unknown and cf extracts the coefficient of a product of
inverse variables.  Because K carries at least one power of x, the x^k
coefficient of U only involves coefficients of order below k, so one sweep
per order determines the solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .series import (
    LaurentSeries,
    SeriesError,
    _EMPTY,
    _bias_key,
    _collect,
    _pack,
    _poly_add,
    _poly_mul,
    _unpack,
    geometric,
)

__all__ = [
    "SeriesFamily",
    "Kernel4",
    "Kernel5",
    "solve_system",
    "solve_width4",
    "solve_width5",
    "width4_order_for_J",
    "width5_order_for_L",
    "series_J",
    "series_L",
]


@dataclass
class Term:
    coef: LaurentSeries
    unknown: str
    args: Tuple[str, ...]
    cf: Tuple[str, ...] = ()


@dataclass
class Equation:
    unknown: str
    terms: List[Term]
    source: LaurentSeries | None = None


@dataclass
class SeriesFamily:
    """Solved unknowns, each stored over the full variable list ``vars``."""

    width: int
    lam: int | None
    vars: Tuple[str, ...]
    trunc: int
    args: Dict[str, Tuple[str, ...]]
    members: Dict[str, LaurentSeries] = field(default_factory=dict)

    def __getitem__(self, name) -> LaurentSeries:
        return self.members[name]

    def member(self, name) -> LaurentSeries:
        """Member expressed in its own argument list."""
        s = self.members[name]
        extra = {v: 0 for v in self.vars if v not in self.args[name]}
        out = s.cf(extra) if extra else s
        return out

    def call(self, name, *actual) -> LaurentSeries:
        """Member with its formal arguments replaced by ``actual`` variables."""
        formal = self.args[name]
        if len(actual) != len(formal):
            raise ValueError(f"{name} takes {len(formal)} arguments")
        return rename_args(self.members[name], formal, actual)


def _arg_matrix(vars, formal, actual) -> np.ndarray:
    d = len(vars)
    m = np.zeros((d, d), dtype=np.int64)
    for v in vars:
        if v not in formal:
            m[vars.index(v), vars.index(v)] = 1
    for a, b in zip(formal, actual):
        m[vars.index(a), vars.index(b)] = 1
    return m


def rename_args(s: LaurentSeries, formal, actual) -> LaurentSeries:
    """Substitute formal -> actual variables in a series that only uses ``formal``."""
    if tuple(formal) == tuple(actual):
        return s
    return s.linear_map(_arg_matrix(s.vars, formal, actual))


class _Op:
    """Argument renaming followed by coefficient extraction, applied per x-order."""

    def __init__(self, vars, formal, actual, cf):
        self.d = len(vars)
        self.identity = tuple(formal) == tuple(actual)
        self.matrix = _arg_matrix(vars, formal, actual)
        self.cf_idx = [vars.index(v) for v in cf]

    def __call__(self, poly):
        keys, vals = poly
        if keys.size == 0:
            return poly
        if self.identity and not self.cf_idx:
            return poly
        e = _unpack(keys, self.d)
        if not self.identity:
            e = e @ self.matrix
        if self.cf_idx:
            sel = np.all(e[:, self.cf_idx] == -1, axis=1)
            if not sel.any():
                return _EMPTY
            e = e[sel].copy()
            vals = vals[sel]
            e[:, self.cf_idx] = 0
        return _collect(_pack(e), vals)


def solve_system(vars, args, equations: Sequence[Equation], lo: int, trunc: int) -> Dict[str, LaurentSeries]:
    """Solve a triangular system for orders lo..trunc."""
    bias = _bias_key(len(vars))
    sol: Dict[str, Dict[int, tuple]] = {eq.unknown: {} for eq in equations}
    plans = []
    op_cache: Dict[tuple, _Op] = {}
    for eq in equations:
        plan = []
        for t in eq.terms:
            if t.coef.valuation() < 1:
                raise SeriesError(f"term for {eq.unknown} lacks a factor of x")
            if t.coef.trunc < trunc - lo:
                raise SeriesError("known coefficient series truncated too early")
            key = (t.unknown, tuple(t.args), tuple(t.cf))
            if key not in op_cache:
                op_cache[key] = _Op(vars, args[t.unknown], t.args, t.cf)
            plan.append((key, sorted(t.coef.coeffs.items())))
        plans.append((eq, plan))
    applied: Dict[tuple, Dict[int, tuple]] = {key: {} for key in op_cache}

    def value(key, m):
        cache = applied[key]
        if m not in cache:
            src = sol[key[0]].get(m)
            cache[m] = _EMPTY if src is None else op_cache[key](src)
        return cache[m]

    for k in range(lo, trunc + 1):
        new = {}
        for eq, plan in plans:
            acc = _EMPTY
            if eq.source is not None:
                acc = eq.source.poly(k)
            for key, kcoefs in plan:
                for i, kp in kcoefs:
                    m = k - i
                    if m < lo:
                        break
                    up = value(key, m)
                    if up[0].size:
                        acc = _poly_add(acc, _poly_mul(kp, up, bias))
            if acc[0].size:
                new[eq.unknown] = acc
        for name, poly in new.items():
            sol[name][k] = poly
    return {name: LaurentSeries(vars, trunc, c) for name, c in sol.items()}


# --------------------------------------------------------------------------
# width 4

class Kernel4:
    """Known polynomials and inverses of the width-4 system, over (t, s, u)."""

    vars = ("t", "s", "u")

    def __init__(self, trunc: int):
        self.trunc = trunc
        V = self.vars
        m = self.m
        X, Y, Z, W, U = m(1, t=-1), m(2, t=2, s=-1), m(2, s=2, t=-1, u=-1), m(2, u=2, s=-1), m(1, u=-1)
        one = m(0)
        self.one = one
        self.q = one - X - Y - Z - W - U + X * Z + X * W + X * U + Y * W + Y * U + Z * U - X * Z * U
        self.p_su = one - W - U
        self.p_st = rename_args(self.p_su, ("u",), ("t",))
        self.r_tu = (one - X) * (one - U)
        self.inv_q = one / self.q
        self.inv_p_su = one / self.p_su
        self.inv_p_st = one / self.p_st

    def m(self, xe=0, coef=1, **e):
        return LaurentSeries.monomial(self.vars, self.trunc, xe, coef, **e)

    def geo(self, xe, **e):
        """1 / (1 - x^xe * monomial)."""
        return geometric(self.m(xe, **e), self.trunc)


W4_ARGS = {
    "f": ("t", "s", "u"),
    "g1": ("s", "u"),
    "g2": ("t", "u"),
    "h1": ("u",),
    "h2": ("u",),
    "h3": ("s",),
    "j1": (),
}

W4_LOW = -3


def width4_equations(K: Kernel4):
    m = K.m
    T = Term
    f = Equation("f", [
        T(m(1, t=1) * K.p_su * K.inv_q, "g1", ("s", "u")),
        T(m(1, s=1) * K.r_tu * K.inv_q, "g2", ("t", "u")),
        T(m(1, u=1) * K.p_st * K.inv_q, "g1", ("s", "t")),
        T(m(2, -1, t=1, u=1, s=-1) * K.inv_q, "h3", ("s",)),
    ])
    g1 = Equation("g1", [
        T(m(1, s=-1), "f", ("t", "s", "u"), ("t",)),
        T(m(2, -1, u=1, s=-1) * K.inv_p_su, "g1", ("s", "t"), ("t",)),
        T((m(1) - m(2, u=-1)) * K.inv_p_su, "h1", ("u",)),
        T(m(1, u=1, s=-1) * K.inv_p_su, "h3", ("s",)),
    ])
    g2 = Equation("g2", [
        T(m(1, t=-1, u=-1), "f", ("t", "s", "u"), ("s",)),
        T(m(1) * K.geo(1, t=-1), "h2", ("u",)),
        T(m(1) * K.geo(1, u=-1), "h2", ("t",)),
    ])
    h1 = Equation("h1", [T(m(1), "g2", ("t", "u"), ("t",))],
                  source=m(-3) * K.geo(1, u=-1))
    h2 = Equation("h2", [T(m(1, u=-1), "g1", ("s", "u"), ("s",))])
    h3 = Equation("h3", [
        T(m(1, 2), "g1", ("s", "u"), ("u",)),
        T(m(2, -1, s=-1), "f", ("t", "s", "u"), ("t", "u")),
    ])
    j1 = Equation("j1", [T(m(1), "h2", ("u",), ("u",))])
    return [f, g1, g2, h1, h2, h3, j1]


def width4_order_for_J(order: int) -> int:
    """Series order needed so that J is known through x^order."""
    return 4 * order - 4


def solve_width4(trunc: int = 20) -> SeriesFamily:
    """Solve the width-4 system through x^trunc (J through x^((trunc+4)//4))."""
    if trunc < 2:
        raise ValueError("truncation order must be at least 2")
    K = Kernel4(trunc - W4_LOW + 2)
    members = solve_system(K.vars, W4_ARGS, width4_equations(K), W4_LOW, trunc)
    return SeriesFamily(4, None, K.vars, trunc, dict(W4_ARGS), members)


def series_J(fam: SeriesFamily) -> Dict[int, int]:
    """Coefficients of J(x) from x^4 J(x^4) = x^8 j1(x) ... re-indexed."""
    j1 = fam.members["j1"].scalar_coeffs()
    top = (fam.trunc + 4) // 4
    out = {k: 0 for k in range(top + 1)}
    for e, c in j1.items():
        # J(x^4) = x^4 j1(x)
        tot = e + 4
        if tot % 4:
            if c:
                raise SeriesError("j1 has a term outside the x^4 lattice")
            continue
        if tot // 4 <= top:
            out[tot // 4] = c
    return out


# --------------------------------------------------------------------------
# width 5

class Kernel5:
    """Known polynomials of the width-5 system, over (t, s, u, v)."""

    vars = ("t", "s", "u", "v")

    def __init__(self, trunc: int):
        self.trunc = trunc
        m = self.m
        one = m(0)
        self.one = one
        X = m(1, t=-1)
        Y = m(2, t=2, s=-1)
        Z = m(2, s=2, t=-1, u=-1)
        W = m(2, u=2, s=-1, v=-1)
        V = m(2, v=2, u=-1)
        U = m(1, v=-1)
        self.q = (one - X - Y - Z - W - V - U
                  + X * Z + X * W + X * V + X * U + Y * W + Y * V + Y * U + Z * V + Z * U + W * U
                  - X * Z * V - X * Z * U - X * W * U - Y * W * U)
        # p1(s,u,v) = P1(x^2u^2/(sv), x^2v^2/u, x/v) with P1(w,v,u) = 1-w-v-u+wu
        self.p1 = one - W - V - U + W * U
        self.p2 = (one - X) * (one - V - U)
        self.r1 = one - V - U
        self.r2 = (one - X) * (one - U)
        self.p1_ust = rename_args(self.p1, ("s", "u", "v"), ("u", "s", "t"))
        self.p2_vst = rename_args(self.p2, ("t", "u", "v"), ("v", "s", "t"))
        self.inv_q = one / self.q
        self.inv_p1 = one / self.p1
        self.inv_p2 = one / self.p2
        self.inv_r1 = one / self.r1

    def m(self, xe=0, coef=1, **e):
        return LaurentSeries.monomial(self.vars, self.trunc, xe, coef, **e)

    def geo(self, xe, **e):
        return geometric(self.m(xe, **e), self.trunc)


W5_ARGS = {
    "f": ("t", "s", "u", "v"),
    "g1": ("s", "u", "v"),
    "g2": ("t", "u", "v"),
    "h1": ("u", "v"),
    "h2": ("u", "v"),
    "h3": ("t", "v"),
    "h4": ("s", "v"),
    "h5": ("s", "u"),
    "j1": ("v",),
    "j2": ("v",),
    "j3": ("u",),
    "j4": ("u",),
    "l1": (),
    "l2": (),
}

W5_LOW = -4


def width5_equations(K: Kernel5, lam: int):
    m = K.m
    T = Term
    iq, ip1, ip2, ir1 = K.inv_q, K.inv_p1, K.inv_p2, K.inv_r1
    one_v = m(0) - m(1, v=-1)  # 1 - x/v
    one_t = m(0) - m(1, t=-1)  # 1 - x/t
    f = Equation("f", [
        T(m(1, t=1) * K.p1 * iq, "g1", ("s", "u", "v")),
        T(m(1, s=1) * K.p2 * iq, "g2", ("t", "u", "v")),
        T(m(1, v=1) * K.p1_ust * iq, "g1", ("u", "s", "t")),
        T(m(1, u=1) * K.p2_vst * iq, "g2", ("v", "s", "t")),
        T(m(2, -1, t=1, u=1) * one_v * iq, "h4", ("s", "v")),
        T(m(2, -1, s=1, v=1) * one_t * iq, "h4", ("u", "t")),
        T(m(2, -1, t=1, v=1) * iq, "h5", ("s", "u")),
    ])
    g1 = Equation("g1", [
        T(m(1, s=-1), "f", W5_ARGS["f"], ("t",)),
        T(m(1) * K.r1 * ip1, "h1", ("u", "v")),
        T(m(1, u=1) * one_v * ip1, "h4", ("s", "v")),
        T(m(1, v=1) * ip1, "h5", ("s", "u")),
        T(m(2, -1, u=1, s=-1) * one_v * ip1, "g2", ("v", "s", "t"), ("t",)),
        T(m(2, -1, v=1, s=-1) * ip1, "g1", ("u", "s", "t"), ("t",)),
        T(m(2, -1, v=1) * ip1, "j3", ("u",)),
    ])
    g2 = Equation("g2", [
        T(m(1, t=-1, u=-1), "f", W5_ARGS["f"], ("s",)),
        T(m(1) * K.r1 * ip2, "h2", ("u", "v")),
        T(m(1) * K.r2 * ip2, "h3", ("t", "v")),
        T(m(1, v=1) * one_t * ip2, "h4", ("u", "t")),
        T(m(2, -1, v=1, u=-1) * ip2, "j4", ("u",)),
        T(m(2, -1, v=1, u=-1, t=-1) * one_t * ip2, "g1", ("u", "s", "t"), ("s",)),
    ])
    h1 = Equation("h1", [
        T(m(1), "g2", W5_ARGS["g2"], ("t",)),
        T(m(1) * one_v * ir1, "j1", ("v",)),
        T(m(1, v=1) * ir1, "j3", ("u",)),
        T(m(2, -1, v=1) * ir1, "h4", ("u", "t"), ("t",)),
    ])
    h2 = Equation("h2", [
        T(m(1, u=-1), "g1", W5_ARGS["g1"], ("s",)),
        T(m(1, v=1, u=-1) * ir1, "j4", ("u",)),
        T(m(2, -1, v=1, u=-1) * ir1, "h5", ("s", "u"), ("s",)),
    ])
    h3 = Equation("h3", [
        T(m(1, t=-1), "g2", ("v", "s", "t"), ("s",)),
        T(m(1) * K.geo(1, v=-1), "j2", ("t",)),
    ])
    h4 = Equation("h4", [
        T(m(1, s=-1, v=-1), "g1", W5_ARGS["g1"], ("u",)),
        T(m(1, s=-1), "g2", ("v", "s", "t"), ("t",)),
        T(m(1, s=-1) * K.geo(1, v=-1), "j4", ("s",)),
        T(m(2, -1, s=-2, v=-1), "f", W5_ARGS["f"], ("t", "u")),
        T(m(2, -1, s=-1) * K.geo(1, v=-1), "h2", ("s", "t"), ("t",)),
    ])
    h5 = Equation("h5", [
        T(m(1, u=-1), "g1", W5_ARGS["g1"], ("v",)),
        T(m(1, s=-1), "g1", ("u", "s", "t"), ("t",)),
        T(m(1), "j3", ("u",)),
        T(m(1), "j3", ("s",)),
        T(m(2, -1, u=-1), "h1", ("u", "v"), ("v",)),
        T(m(2, -1, s=-1), "h1", ("s", "t"), ("t",)),
        T(m(2, -1, s=-1, u=-1), "f", W5_ARGS["f"], ("t", "v")),
    ])
    j1 = Equation("j1", [T(m(1), "h3", ("t", "v"), ("t",))],
                  source=(m(-4) * K.geo(1, v=-1)) if lam == 1 else None)
    j2 = Equation("j2", [T(m(1, v=-1), "h2", ("u", "v"), ("u",))])
    j3 = Equation("j3", [
        T(m(1, u=-1), "h1", ("u", "v"), ("v",)),
        T(m(1), "h4", ("u", "t"), ("t",)),
        T(m(2, -1, u=-1), "g2", W5_ARGS["g2"], ("t", "v")),
    ])
    j4 = Equation("j4", [
        T(m(1), "h2", ("u", "v"), ("v",)),
        T(m(1), "h5", ("u", "s"), ("s",)),
        T(m(2, -1, u=-1), "g1", W5_ARGS["g1"], ("s", "v")),
    ], source=m(1) if lam == 2 else None)
    l1 = Equation("l1", [T(m(1), "j2", ("v",), ("v",))])
    l2 = Equation("l2", [T(m(1), "j3", ("u",), ("u",))])
    return [f, g1, g2, h1, h2, h3, h4, h5, j1, j2, j3, j4, l1, l2]


def width5_order_for_L(order: int, lam: int) -> int:
    """Series order needed so that row lam of L is known through x^order."""
    return 5 * order - 5 * (2 - lam)


def solve_width5(trunc: int, lam: int) -> SeriesFamily:
    """Solve the width-5 system for row ``lam`` through x^trunc."""
    if lam not in (1, 2):
        raise ValueError("lambda must be 1 or 2")
    if trunc < 1:
        raise ValueError("truncation order must be at least 1")
    K = Kernel5(trunc - W5_LOW + 2)
    members = solve_system(K.vars, W5_ARGS, width5_equations(K, lam), W5_LOW, trunc)
    return SeriesFamily(5, lam, K.vars, trunc, dict(W5_ARGS), members)


def series_L(fam: SeriesFamily) -> Tuple[Dict[int, int], Dict[int, int]]:
    """Row (L_{lam,1}, L_{lam,2}) from x^{5(2-lam)} l_mu(x) = L_{lam,mu}(x^5)."""
    lam = fam.lam
    shift = 5 * (2 - lam)
    top = (fam.trunc + shift) // 5
    row = []
    for name in ("l1", "l2"):
        out = {k: 0 for k in range(top + 1)}
        for e, c in fam.members[name].scalar_coeffs().items():
            tot = e + shift
            if tot % 5:
                if c:
                    raise SeriesError(f"{name} has a term outside the x^5 lattice")
                continue
            if 0 <= tot // 5 <= top:
                out[tot // 5] = c
        row.append(out)
    return row[0], row[1]
