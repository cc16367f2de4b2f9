"""Symbolic checks of the eliminated shape equations.

Each checker takes a solved family and returns left side minus right side.
A correct family gives the zero series through the requested order.  The
checks recompute every product from scratch with whole-series arithmetic, so
they are independent of the order-by-order solver.
"""

from __future__ import annotations

from math import comb
from typing import Callable, Dict

from .series import LaurentSeries, SeriesError
from .systems import (
    W4_ARGS,
    W5_ARGS,
    Kernel4,
    Kernel5,
    SeriesFamily,
    rename_args,
    solve_width4,
    solve_width5,
    width4_equations,
    width5_equations,
)

__all__ = ["IDENTITIES", "verify_identity", "residual", "init_residual"]

# orders solved beyond the requested one, absorbing negative valuations
_MARGIN = 6
# tag separating the two width-5 rows inside one residual
_TAG = 4000


def _cf(a: LaurentSeries, *names) -> LaurentSeries:
    return a.cf({n: -1 for n in names}, drop=False)


def init_residual(fam: SeriesFamily, K, name: str) -> LaurentSeries:
    """Residual of the defining recurrence of one unknown."""
    eqs = width4_equations(K) if fam.width == 4 else width5_equations(K, fam.lam)
    eq = next(e for e in eqs if e.unknown == name)
    res = fam[name]
    if eq.source is not None:
        res = res - eq.source
    for t in eq.terms:
        arg = fam.call(t.unknown, *t.args)
        if t.cf:
            arg = _cf(arg, *t.cf)
        res = res - t.coef * arg
    return res


# --------------------------------------------------------------------------
# width 4

def _phi4(K: Kernel4):
    m = K.m
    phi1 = _cf(m(0, t=1) * K.inv_q, "t")
    psi1 = K.one - m(2, s=-1) * K.p_su * phi1
    phi2 = _cf(m(0, s=1) * K.inv_q, "s")
    psi2 = K.one - m(2, t=-1, u=-1) * K.r_tu * phi2
    phi3 = _cf(m(0, t=1, u=1) * K.inv_q, "t", "u")
    psi3 = K.one - m(4, s=-2) * phi3
    return dict(phi1=phi1, psi1=psi1, phi2=phi2, psi2=psi2, phi3=phi3, psi3=psi3)


def _t4_g1(fam, K):
    m, P = K.m, _phi4(K)
    g1, g2, h3 = fam["g1"], fam["g2"], fam["h3"]
    g1_st = fam.call("g1", "s", "t")
    rhs = (m(2, u=1, s=-1) * _cf((K.p_st * K.inv_q - K.inv_p_su) * g1_st, "t")
           + (m(2) - m(3, u=-1)) * _cf(((K.one - m(1, t=-1)) * K.inv_q + K.inv_p_su) * g2, "t")
           + m(1, u=1, s=-1) * P["psi1"] * K.inv_p_su * h3
           + m(-2) * K.inv_p_su)
    return P["psi1"] * g1 - rhs


def _t4_g2(fam, K):
    m, P = K.m, _phi4(K)
    g1, g2, h3 = fam["g1"], fam["g2"], fam["h3"]
    g1_st = fam.call("g1", "s", "t")
    rhs = (m(2, u=-1) * _cf((K.p_su * K.inv_q + K.geo(1, t=-1)) * g1, "s")
           + m(2, t=-1) * _cf((K.p_st * K.inv_q + K.geo(1, u=-1)) * g1_st, "s")
           - _cf(m(3, s=-1) * h3 * K.inv_q, "s"))
    return P["psi2"] * g2 - rhs


def _t4_h3(fam, K):
    m, P = K.m, _phi4(K)
    rhs = (m(1, 2) * _cf(P["psi1"] * fam["g1"], "u")
           - m(3) * _cf(K.r_tu * K.inv_q * fam["g2"], "t", "u"))
    return P["psi3"] * fam["h3"] - rhs


def _t4_j1(fam, K):
    return fam["j1"] - K.m(2) * _cf(K.m(0, u=-1) * fam["g1"], "s", "u")


# --------------------------------------------------------------------------
# width 5

def _phi5(K: Kernel5):
    m = K.m
    phi1 = _cf(m(0, t=1) * K.inv_q, "t")
    psi1 = K.one - m(2, s=-1) * K.p1 * phi1
    phi2 = _cf(m(0, s=1) * K.inv_q, "s")
    psi2 = K.one - m(2, t=-1, u=-1) * K.p2 * phi2
    phi13 = _cf(m(0, t=1, u=1) * K.inv_q, "t", "u")
    psi13 = K.one - m(4, s=-2, v=-1) * (K.one - m(1, v=-1)) * phi13
    phi14 = _cf(m(0, t=1, v=1) * K.inv_q, "t", "v")
    psi14 = K.one - m(4, s=-1, u=-1) * phi14
    phi0 = _cf(m(0, v=1) * K.inv_r1, "v")
    psi0 = K.one - m(2, u=-1) * phi0
    return dict(phi1=phi1, psi1=psi1, phi2=phi2, psi2=psi2, phi13=phi13, psi13=psi13,
                phi14=phi14, psi14=psi14, phi0=phi0, psi0=psi0)


def _ren(s, formal, actual):
    return rename_args(s, formal, actual)


def _t5_g1(fam, K):
    m, P = K.m, _phi5(K)
    d1 = 1 if fam.lam == 1 else 0
    g1, g2 = fam["g1"], fam["g2"]
    g1_ust = fam.call("g1", "u", "s", "t")
    g2_vst = fam.call("g2", "v", "s", "t")
    h4_sv, h4_ut = fam["h4"], fam.call("h4", "u", "t")
    h5, h3 = fam["h5"], fam["h3"]
    one_v = K.one - m(1, v=-1)
    one_t = K.one - m(1, t=-1)
    r1_st = _ren(K.r1, ("u", "v"), ("s", "t"))
    psi1 = P["psi1"]
    rhs = (m(-2, d1) * K.inv_p1
           + psi1 * K.inv_p1 * (m(1, u=1) * one_v * h4_sv + m(1, v=1) * h5)
           + _cf(m(2, v=1, s=-1) * (K.p1_ust * K.inv_q - K.inv_p1) * g1_ust
                 + m(3) * one_v * K.inv_p1 * h3, "t")
           + m(2, u=1, s=-1) * one_v * _cf((r1_st * K.inv_q - K.inv_p1) * g2_vst, "t")
           + _cf((m(2) * one_t * K.inv_q + m(2) * K.inv_p1) * (K.r1 * g2 - m(1, v=1) * h4_ut), "t"))
    return psi1 * g1 - rhs


def _t5_g2(fam, K):
    m, P = K.m, _phi5(K)
    g1, g2 = fam["g1"], fam["g2"]
    g1_ust = fam.call("g1", "u", "s", "t")
    g2_vst = fam.call("g2", "v", "s", "t")
    h3, h4_sv, h4_ut, h5 = fam["h3"], fam["h4"], fam.call("h4", "u", "t"), fam["h5"]
    one_v = K.one - m(1, v=-1)
    psi2 = P["psi2"]
    rhs = (m(1) * one_v * K.inv_r1 * h3
           + m(1, v=1) * psi2 * K.inv_r1 * h4_ut
           + _cf(m(2, v=1, t=-1, u=-1) * (K.p1_ust * K.inv_q - K.inv_r1) * g1_ust
                 + m(2, t=-1) * K.p2_vst * K.inv_q * g2_vst, "s")
           + m(2, u=-1) * _cf((K.p1 * K.inv_q + K.geo(1, t=-1)) * g1, "s")
           - m(3) * one_v * _cf(h4_sv * K.inv_q, "s")
           - m(3, v=1, u=-1) * _cf((K.inv_q + K.inv_p2) * h5, "s"))
    return psi2 * g2 - rhs


def _t5_h4(fam, K):
    m, P = K.m, _phi5(K)
    d2 = 1 if fam.lam == 2 else 0
    g1, g2 = fam["g1"], fam["g2"]
    g1_ust = fam.call("g1", "u", "s", "t")
    g2_vst = fam.call("g2", "v", "s", "t")
    h4_ut, h5 = fam.call("h4", "u", "t"), fam["h5"]
    psi1 = P["psi1"]
    psi2_vst = _ren(P["psi2"], ("t", "u", "v"), ("v", "s", "t"))
    geo_v = K.geo(1, v=-1)
    rhs = (m(2, d2, s=-1) * geo_v
           + m(1, s=-1, v=-1) * _cf(psi1 * g1, "u")
           + m(1, s=-1) * _cf(psi2_vst * g2_vst, "t")
           - m(3, s=-1) * _cf((m(0, s=-1) * geo_v + m(0, s=-1) * K.p1_ust * K.inv_q) * g1_ust
                              + m(0, v=-1) * K.p2 * K.inv_q * g2, "t", "u")
           + _cf((m(2, s=-1) * geo_v + m(4, s=-2) * P["phi1"]) * h5, "u")
           + _cf(m(4, s=-1) * (K.one - m(1, t=-1)) * K.inv_q * h4_ut, "t", "u"))
    return P["psi13"] * fam["h4"] - rhs


def _t5_h5(fam, K):
    m, P = K.m, _phi5(K)
    g1, g2 = fam["g1"], fam["g2"]
    g1_ust = fam.call("g1", "u", "s", "t")
    g2_vst = fam.call("g2", "v", "s", "t")
    h4_sv, h4_ut = fam["h4"], fam.call("h4", "u", "t")
    psi1, phi1 = P["psi1"], P["phi1"]
    psi1_ust = _ren(psi1, ("s", "u", "v"), ("u", "s", "t"))
    phi1_ust = _ren(phi1, ("s", "u", "v"), ("u", "s", "t"))
    rhs = (m(1, u=-1) * _cf(psi1 * g1, "v")
           + m(1, s=-1) * _cf(psi1_ust * g1_ust, "t")
           + _cf((m(2) + m(4, s=-1) * (K.one - m(1, v=-1)) * phi1) * h4_sv, "v")
           + _cf((m(2) + m(4, u=-1) * (K.one - m(1, t=-1)) * phi1_ust) * h4_ut, "t")
           - _cf(m(3, u=-1) * (K.one + K.p2 * K.inv_q) * g2
                 + m(3, s=-1) * (K.one + K.p2_vst * K.inv_q) * g2_vst, "t", "v"))
    return P["psi14"] * fam["h5"] - rhs


def _delta2_tail(fam, K, P):
    """x^2 v delta_{lam,2} / (u r1 Psi0)."""
    if fam.lam != 2:
        return K.m(0) * 0
    return K.m(2, v=1, u=-1) * K.inv_r1 * (K.one / P["psi0"])


def _t5_j2(fam, K):
    m, P = K.m, _phi5(K)
    rhs = _cf(m(2, u=-1, v=-1) * fam["g1"], "s", "u")
    if fam.lam == 2:
        rhs = rhs + _cf(m(3, u=-1) * K.inv_r1 * (K.one / P["psi0"]), "u")
    return fam["j2"] - rhs


def _t5_h3(fam, K):
    return init_residual(fam, K, "h3")


def _t5_l12(fam, K):
    m = K.m
    d1 = 1 if fam.lam == 1 else 0
    r1 = fam["l1"] - m(1) * _cf(fam["j2"], "v")
    r2 = fam["l2"] - (m(4) * _cf(fam["h3"], "t", "v") + m(2) * _cf(fam["h4"], "s", "v") + d1)
    # keep both components apart by tagging the second with t
    return r1 + m(0, t=1) * r2


def _t5_l1_alt(fam, K):
    m = K.m
    d2 = 1 if fam.lam == 2 else 0
    return fam["l1"] - (_cf(m(3, u=-1, v=-1) * fam["g1"], "s", "u", "v") + m(5, d2))


def _eq_phi0(fam, K):
    P = _phi5(K)
    return fam["h2"] - (K.m(1, u=-1) * _cf(fam["g1"], "s") + _delta2_tail(fam, K, P))


def _eq_L2(fam, K):
    m = K.m
    return fam["l2"] - (m(2) * _cf(fam.call("h4", "u", "t"), "t", "u") + m(3) * _cf(fam["j1"], "v"))


def rem_phi0_residual(trunc: int) -> LaurentSeries:
    """(x^2/u) Phi0(u) minus its closed binomial expansion."""
    K = Kernel5(trunc + 4)
    P = _phi5(K)
    lhs = (K.m(2, u=-1) * P["phi0"]).truncate(trunc)
    terms = [(4 * n, (0, 0, -n, 0), comb(3 * n - 1, n - 1)) for n in range(1, trunc // 4 + 1)]
    return lhs - LaurentSeries.from_terms(K.vars, trunc, terms)


IDENTITIES: Dict[str, tuple] = {
    "t4.g1": (4, None, _t4_g1),
    "t4.g2": (4, None, _t4_g2),
    "t4.h3": (4, None, _t4_h3),
    "t4.j1": (4, None, _t4_j1),
    "t5.h3": (5, (1, 2), _t5_h3),
    "t5.g1-1": (5, (1, 2), _t5_g1),
    "t5.g2-1": (5, (1, 2), _t5_g2),
    "t5.h4-1": (5, (1, 2), _t5_h4),
    "t5.h5-1": (5, (1, 2), _t5_h5),
    "t5.j2-1": (5, (1, 2), _t5_j2),
    "t5.l12-1": (5, (1, 2), _t5_l12),
    "t5.l1-alt": (5, (1, 2), _t5_l1_alt),
    "eq.phi0": (5, (1, 2), _eq_phi0),
    "eq.L2": (5, (1, 2), _eq_L2),
    "rem.phi0": (5, None, None),
}
for _name in W4_ARGS:
    IDENTITIES[f"t4.{_name}.init"] = (4, None, _name)
for _name in W5_ARGS:
    IDENTITIES[f"t5.{_name}.init"] = (5, (1, 2), _name)


def _family(width, lam, order, cache):
    key = (width, lam, order)
    if key not in cache:
        if width == 4:
            fam = solve_width4(order + _MARGIN)
            K = Kernel4(order + _MARGIN + 12)
        else:
            fam = solve_width5(order + _MARGIN, lam)
            K = Kernel5(order + _MARGIN + 12)
        cache[key] = (fam, K)
    return cache[key]


def residual(ident: str, fam: SeriesFamily, K, order: int) -> LaurentSeries:
    """Residual of ``ident`` for an already solved family, truncated at ``order``."""
    if ident not in IDENTITIES:
        raise KeyError(f"unknown identity {ident!r}")
    width, _, fn = IDENTITIES[ident]
    if width != fam.width:
        raise ValueError(f"{ident} concerns width {width}")
    res = init_residual(fam, K, fn) if isinstance(fn, str) else fn(fam, K)
    if res.trunc < order:
        raise SeriesError(f"{ident}: residual only exact through x^{res.trunc}")
    return res.truncate(order)


def verify_identity(ident: str, order: int, lam: int | None = None, _cache: dict | None = None) -> LaurentSeries:
    """Residual of one identity through x^order; zero when it holds.

    Width-5 identities are checked for both rows unless ``lam`` is given, and
    the residuals are added with distinct tags so cancellations cannot hide.
    """
    if ident not in IDENTITIES:
        raise KeyError(f"unknown identity {ident!r}")
    cache = {} if _cache is None else _cache
    width, lams, fn = IDENTITIES[ident]
    if ident == "rem.phi0":
        return rem_phi0_residual(order)
    if width == 4:
        fam, K = _family(4, None, order, cache)
        return residual(ident, fam, K, order)
    total = None
    for i, lm in enumerate([lam] if lam else lams):
        fam, K = _family(5, lm, order, cache)
        r = residual(ident, fam, K, order)
        r = K.m(0, s=_TAG) * r if i else r
        total = r if total is None else total + r
    return total.truncate(order)
