"""Numerical evaluation of the algebraic kernels and their contour integrals.

The polynomials q, p, r (width 4) and q, p1, p2, r1, r2 (width 5) are taken
from the symbolic series module and flattened into term lists, so numeric and
symbolic code share one definition.  The coefficient integrals

    Phi_1 = cf_t t/q,  Phi_2 = cf_s s/q,  Phi_0 = cf_v v/r1

are sums of residues a_i / q'(a_i) over the roots a_i inside the unit disk,
or plain quadrature sums.  Double integrals (Phi_3, Phi_13, Phi_14) are an
outer quadrature of an inner residue sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Mapping

import numpy as np
from scipy import optimize

from .quadrature import make_grid
from .systems import Kernel4, Kernel5

__all__ = [
    "PolyTerms",
    "kernel_polys",
    "eval_poly",
    "eval_algebraic",
    "roots_in_unit_disk",
    "residue_phi",
    "quadrature_phi",
    "eval_phi_psi",
    "psi_at_one",
    "psi_zero",
    "KernelError",
]


class KernelError(ArithmeticError):
    """Kernel evaluation left its domain (root on or near the unit circle)."""


@dataclass(frozen=True)
class PolyTerms:
    """Polynomial in x and Laurent variables as flat arrays."""

    vars: tuple
    xexp: np.ndarray
    exps: np.ndarray
    coef: np.ndarray

    def drop(self, var) -> "PolyTerms":
        keep = [i for i, v in enumerate(self.vars) if v != var]
        return PolyTerms(tuple(self.vars[i] for i in keep), self.xexp, self.exps[:, keep], self.coef)


def _terms(series) -> PolyTerms:
    rows = list(series.terms())
    xexp = np.array([r[0] for r in rows], dtype=np.int64)
    exps = np.array([r[1] for r in rows], dtype=np.int64).reshape(len(rows), series.nvars)
    coef = np.array([r[2] for r in rows], dtype=np.float64)
    return PolyTerms(series.vars, xexp, exps, coef)


@lru_cache(maxsize=None)
def kernel_polys(width: int) -> Dict[str, PolyTerms]:
    """Term lists of the algebraic kernels, over (t,s,u) or (t,s,u,v)."""
    if width == 4:
        K = Kernel4(8)
        return {"q": _terms(K.q), "p": _terms(K.p_su), "r": _terms(K.r_tu)}
    if width == 5:
        K = Kernel5(12)
        r2 = K.r2
        return {"q": _terms(K.q), "p1": _terms(K.p1), "p2": _terms(K.p2),
                "r1": _terms(K.r1), "r2": _terms(r2)}
    raise ValueError("width must be 4 or 5")


def _monomials(pt: PolyTerms, x, values: Mapping[str, object]):
    """Yield (coefficient * x^a, list of (value, exponent)) per term."""
    for i in range(pt.coef.size):
        c = pt.coef[i] * x ** int(pt.xexp[i])
        yield c, [(values[v], int(pt.exps[i, j])) for j, v in enumerate(pt.vars) if pt.exps[i, j]]


def eval_poly(pt: PolyTerms, x, values: Mapping[str, object]):
    """Evaluate at x and broadcastable arrays for each variable used."""
    out = 0
    for c, factors in _monomials(pt, x, values):
        term = c
        for val, e in factors:
            term = term * val ** e
        out = out + term
    return out


def _poly_in(pt: PolyTerms, active: str):
    """Coefficients of the Laurent polynomial in ``active``: (min_exp, list of PolyTerms)."""
    j = pt.vars.index(active)
    e = pt.exps[:, j]
    lo, hi = int(e.min()), int(e.max())
    parts = []
    for k in range(lo, hi + 1):
        sel = e == k
        parts.append(PolyTerms(pt.vars, pt.xexp[sel], pt.exps[sel], pt.coef[sel]).drop(active))
    return lo, parts


def eval_algebraic(width: int, x, point: Mapping[str, object]) -> Dict[str, object]:
    """Values of the algebraic kernels at ``x`` and the given circle coordinates.

    Kernels whose variables are not all supplied are skipped.
    """
    out = {}
    polys = kernel_polys(width)
    for name, pt in polys.items():
        used = [v for j, v in enumerate(pt.vars) if np.any(pt.exps[:, j])]
        if all(v in point for v in used):
            out[name] = eval_poly(pt, x, point)
    return out


# --------------------------------------------------------------------------
# roots and residues

def _companion_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots of polynomials with coefficient rows (lowest degree first)."""
    lead = coeffs[..., -1]
    deg = coeffs.shape[-1] - 1
    shape = coeffs.shape[:-1]
    c = (coeffs[..., :-1] / lead[..., None]).reshape(-1, deg)
    comp = np.zeros((c.shape[0], deg, deg), dtype=np.complex128)
    comp[:, 1:, :-1] = np.eye(deg - 1)
    comp[:, :, -1] = -c
    return np.linalg.eigvals(comp).reshape(shape + (deg,))


def _horner(coeffs, z):
    val = np.zeros_like(z)
    der = np.zeros_like(z)
    for k in range(coeffs.shape[-1] - 1, -1, -1):
        der = der * z + val
        val = val * z + coeffs[..., k][..., None]
    return val, der


def roots_in_unit_disk(width: int, name: str, active: str, x, fixed: Mapping[str, object],
                       expected: int | None = None, dtype=np.complex128, tol: float = 1e-8):
    """Roots of a^m * kernel(a) with |a| < 1, for arrays of fixed coordinates.

    Returns an array of shape (..., count).  Raises KernelError when the
    count varies, differs from ``expected``, or a root sits on the circle.
    """
    pt = kernel_polys(width)[name]
    lo, parts = _poly_in(pt, active)
    fixed = {k: np.asarray(v, dtype=dtype) for k, v in fixed.items()}
    shape = np.broadcast(*fixed.values()).shape if fixed else ()
    xd = dtype(x) if not isinstance(x, np.ndarray) else x.astype(dtype)
    coeffs = np.stack([np.broadcast_to(np.asarray(eval_poly(p, xd, fixed), dtype=dtype), shape)
                       for p in parts], axis=-1)
    # strip vanishing top coefficients (x = 0 degenerates the polynomial)
    while coeffs.shape[-1] > 1 and np.all(coeffs[..., -1] == 0):
        coeffs = coeffs[..., :-1]
    roots = _companion_roots(coeffs.astype(np.complex128)).astype(dtype)
    for _ in range(3):
        val, der = _horner(coeffs, roots)
        roots = roots - val / der
    mod = np.abs(roots)
    if np.any(np.abs(mod - 1) < tol):
        raise KernelError("root of the kernel on the unit circle")
    inside = mod < 1
    counts = inside.sum(axis=-1)
    cmin, cmax = int(counts.min()), int(counts.max())
    if cmin != cmax or (expected is not None and cmin != expected):
        raise KernelError(f"interior root count {cmin}..{cmax}, expected {expected}")
    order = np.argsort(~inside, axis=-1, kind="stable")
    picked = np.take_along_axis(roots, order, axis=-1)[..., :cmin]
    return picked, coeffs, lo


# expected interior root counts, determined at small x
_EXPECTED = {(4, "q", "t"): 2, (4, "q", "s"): 2, (5, "q", "t"): 2, (5, "q", "s"): 2, (5, "r1", "v"): 1}


def residue_phi(width: int, name: str, active: str, x, fixed, dtype=np.complex128):
    """cf_{a^-1} a / kernel = sum over interior roots of a_i / kernel'(a_i)."""
    roots, coeffs, lo = roots_in_unit_disk(width, name, active, x, fixed,
                                           _EXPECTED.get((width, name, active)), dtype)
    # kernel = P(a) a^lo, so a/kernel = a^(1-lo)/P and the residue is a^(1-lo)/P'
    _, der = _horner(coeffs, roots)
    return np.sum(roots ** (1 - lo) / der, axis=-1)


def quadrature_phi(width: int, name: str, active: str, x, fixed, n: int = 256, b: float = 0.0,
                   dtype=np.complex128):
    """cf_{a^-1} a / kernel by the trapezoidal rule with n nodes."""
    g = make_grid(n, b, True, dtype=dtype)
    pt = kernel_polys(width)[name]
    fixed = {k: np.asarray(v, dtype=dtype)[..., None] for k, v in fixed.items()}
    vals = dict(fixed)
    vals[active] = g.nodes
    ker = eval_poly(pt, dtype(x), vals)
    return np.sum(g.cf * g.nodes / ker, axis=-1)


_PHI_SPEC = {
    # name: (kernel, active variable)
    (4, "phi1"): ("q", "t"),
    (4, "phi2"): ("q", "s"),
    (5, "phi1"): ("q", "t"),
    (5, "phi2"): ("q", "s"),
    (5, "phi0"): ("r1", "v"),
}


def _inner(width, key, x, fixed, method, dtype, nq=256):
    kern, act = _PHI_SPEC[(width, key)]
    if method == "residue":
        return residue_phi(width, kern, act, x, fixed, dtype)
    if method == "quadrature":
        return quadrature_phi(width, kern, act, x, fixed, n=nq, dtype=dtype)
    raise ValueError(f"unknown method {method}")


def _outer(width, x, fixed, outer_var, method, dtype, n_outer):
    """cf_{w^-1} w * Phi_1(...) over the outer variable w."""
    g = make_grid(n_outer, 0.0, True, dtype=dtype)
    pts = {k: np.asarray(v, dtype=dtype)[..., None] for k, v in fixed.items()}
    pts[outer_var] = g.nodes
    inner = _inner(width, "phi1", x, pts, method, dtype)
    return np.sum(g.cf * g.nodes * inner, axis=-1)


def eval_phi_psi(width: int, x, point: Mapping[str, object], method: str = "residue",
                 dtype=np.complex128, n_outer: int = 512) -> Dict[str, object]:
    """Phi and Psi values at one point (or broadcast arrays) of the torus.

    ``point`` supplies t, s, u (and v for width 5); each Phi uses the subset
    of coordinates it depends on.
    """
    P = {k: np.asarray(v, dtype=dtype) for k, v in point.items()}
    x = dtype(x)
    out = dict(eval_algebraic(width, x, P))
    if width == 4:
        s, u, t = P["s"], P["u"], P.get("t")
        phi1 = _inner(4, "phi1", x, {"s": s, "u": u}, method, dtype)
        p = eval_poly(kernel_polys(4)["p"], x, {"s": s, "u": u})
        out["phi1"] = phi1
        out["psi1"] = 1 - x * x / s * p * phi1
        if t is not None:
            phi2 = _inner(4, "phi2", x, {"t": t, "u": u}, method, dtype)
            r = eval_poly(kernel_polys(4)["r"], x, {"t": t, "u": u})
            out["phi2"] = phi2
            out["psi2"] = 1 - x * x / (t * u) * r * phi2
        phi3 = _outer(4, x, {"s": s}, "u", method, dtype, n_outer)
        out["phi3"] = phi3
        out["psi3"] = 1 - x ** 4 / s ** 2 * phi3
        return out
    t, s, u, v = P["t"], P["s"], P["u"], P["v"]
    K = kernel_polys(5)
    phi1 = _inner(5, "phi1", x, {"s": s, "u": u, "v": v}, method, dtype)
    phi2 = _inner(5, "phi2", x, {"t": t, "u": u, "v": v}, method, dtype)
    p1 = eval_poly(K["p1"], x, {"s": s, "u": u, "v": v})
    p2 = eval_poly(K["p2"], x, {"t": t, "u": u, "v": v})
    out["phi1"], out["phi2"] = phi1, phi2
    out["psi1"] = 1 - x * x / s * p1 * phi1
    out["psi2"] = 1 - x * x / (t * u) * p2 * phi2
    phi13 = _outer(5, x, {"s": s, "v": v}, "u", method, dtype, n_outer)
    phi14 = _outer(5, x, {"s": s, "u": u}, "v", method, dtype, n_outer)
    out["phi13"], out["phi14"] = phi13, phi14
    out["psi13"] = 1 - x ** 4 * (v - x) / (s * s * v * v) * phi13
    out["psi14"] = 1 - x ** 4 / (s * u) * phi14
    phi0 = _inner(5, "phi0", x, {"u": u}, method, dtype)
    out["phi0"] = phi0
    out["psi0"] = 1 - x * x / u * phi0
    return out


# --------------------------------------------------------------------------
# zeros of Psi on the real segment

def _phi3_adaptive(x: float, order: int = 40) -> float:
    """Phi_3(1) = cf_u u Phi_1(1, u) by graded Gauss-Legendre quadrature.

    Near x = 1/2 the integrand peaks at u = 1 with width of order
    sqrt(1 - 2x), so the angle range [0, pi] is split geometrically from
    that scale and each panel gets a fixed Gauss-Legendre rule.  The
    integrand is even in the angle.
    """
    width = np.sqrt(max(1e-300, 1 - 2 * x))
    cuts = [0.0]
    c = width * 1e-2
    while c < np.pi:
        cuts.append(c)
        c *= 4
    cuts.append(np.pi)
    gx, gw = np.polynomial.legendre.leggauss(order)
    a = np.array(cuts[:-1])[:, None]
    b = np.array(cuts[1:])[:, None]
    theta = (0.5 * (b - a) * gx + 0.5 * (b + a)).ravel()
    wts = (0.5 * (b - a) * gw).ravel()
    u = np.exp(1j * theta)
    vals = (u * u * residue_phi(4, "q", "t", x, {"s": 1.0, "u": u})).real
    return float(np.dot(wts, vals)) / np.pi


def psi_at_one(which: str, x: float) -> float:
    """Psi_1, Psi_2 or Psi_3 at t = s = u = 1 for real x."""
    if which == "psi1":
        phi = residue_phi(4, "q", "t", x, {"s": 1.0, "u": 1.0}).real
        return 1 - x * x * (1 - x * x - x) * phi
    if which == "psi2":
        phi = residue_phi(4, "q", "s", x, {"t": 1.0, "u": 1.0}).real
        return 1 - x * x * (1 - x) ** 2 * phi
    if which == "psi3":
        return 1 - x ** 4 * _phi3_adaptive(x)
    raise ValueError(f"unknown Psi {which!r}")


def psi_zero(which: str, lo: float = 0.3, hi: float = 0.5 - 5e-16, xtol: float = 1e-15):
    """Root of the decreasing function Psi(x) at t=s=u=1 in (lo, hi).

    Returns (root, (a, b)) with Psi(a) > 0 > Psi(b).  Psi_3 only turns
    negative about 1e-12 below 1/2, hence the default upper end.
    """
    fa, fb = psi_at_one(which, lo), psi_at_one(which, hi)
    if not (fa > 0 > fb):
        raise KernelError(f"{which}: no sign change on [{lo}, {hi}]")
    root = optimize.brentq(lambda z: psi_at_one(which, z), lo, hi, xtol=xtol)
    a, b = max(lo, root - 4 * xtol), min(hi, root + 4 * xtol)
    if not (psi_at_one(which, a) > 0 > psi_at_one(which, b)):
        raise KernelError(f"{which}: bracket around {root} not certified")
    return root, (a, b)
