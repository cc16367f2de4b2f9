"""Truncated x-adic series with Laurent-polynomial coefficients.

A series lives in Z[t^{+-1}, s^{+-1}, ...]((x)).  For each power of x we keep
a sparse Laurent polynomial in the named variables, stored as a sorted array
of packed exponent keys and a parallel array of integer coefficients.  Keys
pack one 15-bit biased field per variable into an int64, so adding two keys
(and subtracting the bias) multiplies the monomials.

Coefficients are int64 while products provably fit, and Python integers in
object arrays otherwise, so every operation is exact.

``trunc`` is the highest power of x whose coefficient is known exactly.
Negative powers of x are allowed.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

__all__ = [
    "LaurentSeries",
    "SeriesError",
    "series_mul",
    "series_div",
    "cf_extract",
    "substitute_monomial",
    "geometric",
]

_BITS = 15
_BIAS = 1 << (_BITS - 1)
_MASK = (1 << _BITS) - 1
_EXP_LIMIT = _BIAS // 2
_MAX_VARS = 4
_I64_SAFE = float(1 << 62)


class SeriesError(ArithmeticError):
    """Raised on an operation that is undefined in the truncated ring."""


def _bias_key(d: int) -> int:
    return sum(_BIAS << (_BITS * i) for i in range(d))


def _pack(exps: np.ndarray) -> np.ndarray:
    exps = np.asarray(exps, dtype=np.int64)
    if exps.ndim != 2:
        raise ValueError("exponent array must be 2-d")
    if exps.size and np.abs(exps).max() >= _EXP_LIMIT:
        raise SeriesError("Laurent exponent out of range")
    keys = np.zeros(exps.shape[0], dtype=np.int64)
    for i in range(exps.shape[1]):
        keys |= (exps[:, i] + _BIAS) << (_BITS * i)
    return keys


def _unpack(keys: np.ndarray, d: int) -> np.ndarray:
    out = np.empty((keys.shape[0], d), dtype=np.int64)
    for i in range(d):
        out[:, i] = ((keys >> (_BITS * i)) & _MASK) - _BIAS
    return out


def _absmax(vals: np.ndarray) -> float:
    if vals.size == 0:
        return 0.0
    if vals.dtype == object:
        return float(max(abs(v) for v in vals))
    return float(np.abs(vals).max())


def _narrow(vals: np.ndarray) -> np.ndarray:
    """Return int64 coefficients when they fit comfortably, else objects."""
    if vals.dtype == object and _absmax(vals) < _I64_SAFE:
        return vals.astype(np.int64)
    return vals


def _collect(keys: np.ndarray, vals: np.ndarray):
    """Sum coefficients of equal keys, drop zeros, return sorted arrays."""
    if keys.size == 0:
        return keys, vals
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    sv = vals[order]
    starts = np.flatnonzero(np.r_[True, sk[1:] != sk[:-1]])
    sums = np.add.reduceat(sv, starts)
    uk = sk[starts]
    nz = sums != 0
    if sums.dtype == object:
        nz = nz.astype(bool)
    return uk[nz], _narrow(sums[nz])


def _as_object(v: np.ndarray) -> np.ndarray:
    return v if v.dtype == object else v.astype(object)


def _poly_add(a, b):
    ka, va = a
    kb, vb = b
    if ka.size == 0:
        return b
    if kb.size == 0:
        return a
    if va.dtype == object or vb.dtype == object or _absmax(va) + _absmax(vb) >= _I64_SAFE:
        va, vb = _as_object(va), _as_object(vb)
    return _collect(np.concatenate([ka, kb]), np.concatenate([va, vb]))


def _poly_neg(a):
    return a[0], -a[1]


def _poly_scale(a, c: int):
    if c == 0:
        return _EMPTY
    k, v = a
    if v.dtype != object and _absmax(v) * abs(c) >= _I64_SAFE:
        v = v.astype(object)
    if v.dtype != object and abs(c) >= _I64_SAFE:
        v = v.astype(object)
    return k, v * c


def _poly_mul(a, b, bias: int):
    ka, va = a
    kb, vb = b
    if ka.size == 0 or kb.size == 0:
        return _EMPTY
    bound = _absmax(va) * _absmax(vb) * min(ka.size, kb.size)
    if va.dtype == object or vb.dtype == object or bound >= _I64_SAFE:
        va, vb = _as_object(va), _as_object(vb)
    keys = (np.add.outer(ka, kb) - bias).ravel()
    vals = np.multiply.outer(va, vb).ravel()
    return _collect(keys, vals)


_EMPTY = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))


class LaurentSeries:
    """Element of Z[vars^{+-1}]((x)) known exactly through x^trunc."""

    __slots__ = ("vars", "trunc", "coeffs")

    def __init__(self, vars: Sequence[str], trunc: int, coeffs=None):
        vars = tuple(vars)
        if len(vars) > _MAX_VARS or len(set(vars)) != len(vars):
            raise ValueError(f"bad variable list {vars}")
        self.vars = vars
        self.trunc = int(trunc)
        self.coeffs: Dict[int, tuple] = {}
        for k, poly in (coeffs or {}).items():
            if k <= self.trunc and poly[0].size:
                self.coeffs[int(k)] = poly

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, vars, trunc):
        return cls(vars, trunc)

    @classmethod
    def from_terms(cls, vars, trunc, terms: Iterable):
        """Build from ``(x_exp, exponent_vector, coefficient)`` triples."""
        vars = tuple(vars)
        d = len(vars)
        grouped: Dict[int, list] = {}
        for xe, ev, c in terms:
            ev = tuple(ev) if d else ()
            if len(ev) != d:
                raise ValueError("exponent vector length mismatch")
            grouped.setdefault(int(xe), []).append((ev, int(c)))
        coeffs = {}
        for xe, items in grouped.items():
            exps = np.array([e for e, _ in items], dtype=np.int64).reshape(len(items), d)
            vals = np.array([c for _, c in items], dtype=object)
            coeffs[xe] = _collect(_pack(exps), _narrow(vals))
        return cls(vars, trunc, coeffs)

    @classmethod
    def monomial(cls, vars, trunc, x_exp=0, coef=1, **exps):
        vars = tuple(vars)
        for name in exps:
            if name not in vars:
                raise ValueError(f"unknown variable {name}")
        ev = [exps.get(v, 0) for v in vars]
        return cls.from_terms(vars, trunc, [(x_exp, ev, coef)])

    @classmethod
    def one(cls, vars, trunc):
        return cls.monomial(vars, trunc)

    # inspection ---------------------------------------------------------
    @property
    def nvars(self) -> int:
        return len(self.vars)

    def valuation(self) -> int:
        """Lowest stored power of x (trunc + 1 for the zero series)."""
        return min(self.coeffs) if self.coeffs else self.trunc + 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, k: int) -> Dict[tuple, int]:
        """Laurent coefficient of x^k as a dict exponent-vector -> int."""
        if k > self.trunc:
            raise SeriesError(f"x^{k} lies beyond the truncation order {self.trunc}")
        poly = self.coeffs.get(k)
        if poly is None:
            return {}
        exps = _unpack(poly[0], self.nvars)
        return {tuple(int(e) for e in row): int(c) for row, c in zip(exps, poly[1])}

    def poly(self, k: int):
        return self.coeffs.get(k, _EMPTY)

    def scalar_coeffs(self) -> Dict[int, int]:
        """Coefficients of a series without Laurent dependence."""
        out = {}
        for k in sorted(self.coeffs):
            d = self.coeff(k)
            if any(any(e) for e in d):
                raise SeriesError("series still depends on Laurent variables")
            out[k] = sum(d.values())
        return out

    def nterms(self) -> int:
        return sum(p[0].size for p in self.coeffs.values())

    def terms(self):
        """Iterate ``(x_exp, exponent_vector, coefficient)`` in sorted order."""
        for k in sorted(self.coeffs):
            for ev, c in sorted(self.coeff(k).items()):
                yield k, ev, c

    def __repr__(self):
        return f"LaurentSeries(vars={self.vars}, trunc={self.trunc}, terms={self.nterms()})"

    def __eq__(self, other):
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        if self.vars != other.vars:
            return False
        n = min(self.trunc, other.trunc)
        return (self - other).truncate(n).is_zero()

    __hash__ = None

    # structural ---------------------------------------------------------
    def truncate(self, n: int) -> "LaurentSeries":
        n = min(n, self.trunc)
        return LaurentSeries(self.vars, n, {k: p for k, p in self.coeffs.items() if k <= n})

    def with_trunc(self, n: int) -> "LaurentSeries":
        """Declare a polynomial exact to a higher order (caller's promise)."""
        return LaurentSeries(self.vars, n, self.coeffs)

    def shift(self, m: int) -> "LaurentSeries":
        """Multiply by x^m."""
        return LaurentSeries(self.vars, self.trunc + m, {k + m: p for k, p in self.coeffs.items()})

    def embed(self, vars: Sequence[str]) -> "LaurentSeries":
        """Re-express in a larger ordered variable list."""
        vars = tuple(vars)
        if vars == self.vars:
            return self
        missing = [v for v in self.vars if v not in vars]
        if missing:
            raise ValueError(f"variables {missing} absent from {vars}")
        idx = [vars.index(v) for v in self.vars]
        coeffs = {}
        for k, (keys, vals) in self.coeffs.items():
            old = _unpack(keys, self.nvars)
            new = np.zeros((keys.size, len(vars)), dtype=np.int64)
            new[:, idx] = old
            coeffs[k] = _collect(_pack(new), vals)
        return LaurentSeries(vars, self.trunc, coeffs)

    def linear_map(self, matrix, x_shift=None, vars=None) -> "LaurentSeries":
        """Send the exponent row e to e @ matrix, and x^k to x^(k + e . x_shift)."""
        vars = self.vars if vars is None else tuple(vars)
        if x_shift is not None and min(x_shift) < 0:
            # lowering the x-degree would pull in unknown orders
            raise SeriesError("map lowers x-degree; truncation undefined")
        matrix = np.asarray(matrix, dtype=np.int64).reshape(self.nvars, len(vars))
        coeffs: Dict[int, list] = {}
        for k, (keys, vals) in self.coeffs.items():
            e = _unpack(keys, self.nvars)
            ne = e @ matrix
            if x_shift is None:
                coeffs.setdefault(k, []).append((_pack(ne), vals))
                continue
            ks = k + e @ np.asarray(x_shift, dtype=np.int64)
            for kk in np.unique(ks):
                sel = ks == kk
                coeffs.setdefault(int(kk), []).append((_pack(ne[sel]), vals[sel]))
        out = {}
        for k, parts in coeffs.items():
            acc = _EMPTY
            for p in parts:
                acc = _poly_add(acc, _collect(*p))
            if acc[0].size:
                out[k] = acc
        return LaurentSeries(vars, self.trunc, out)

    def rename(self, mapping: Mapping[str, str]) -> "LaurentSeries":
        """Substitute variables by variables of the same list (permutations and merges)."""
        d = self.nvars
        m = np.zeros((d, d), dtype=np.int64)
        for i, v in enumerate(self.vars):
            m[i, self.vars.index(mapping.get(v, v))] = 1
        return self.linear_map(m)

    def cf(self, exps: Mapping[str, int], drop: bool = True) -> "LaurentSeries":
        """Coefficient of the monomial prod var^e, as a series in the other variables."""
        idx = {self.vars.index(v): int(e) for v, e in exps.items()}
        keep = [i for i in range(self.nvars) if i not in idx] if drop else list(range(self.nvars))
        nv = tuple(self.vars[i] for i in keep)
        coeffs = {}
        for k, (keys, vals) in self.coeffs.items():
            e = _unpack(keys, self.nvars)
            sel = np.ones(keys.size, dtype=bool)
            for i, ex in idx.items():
                sel &= e[:, i] == ex
            if not sel.any():
                continue
            ne = e[sel]
            if not drop:
                ne = ne.copy()
                ne[:, list(idx)] = 0
            else:
                ne = ne[:, keep]
            coeffs[k] = _collect(_pack(ne), vals[sel])
        return LaurentSeries(nv, self.trunc, coeffs)

    # arithmetic ---------------------------------------------------------
    def _check(self, other: "LaurentSeries"):
        if self.vars != other.vars:
            raise ValueError(f"variable lists differ: {self.vars} vs {other.vars}")

    def _coerce(self, other):
        if isinstance(other, LaurentSeries):
            self._check(other)
            return other
        if isinstance(other, (int, np.integer)):
            return LaurentSeries.monomial(self.vars, self.trunc, coef=int(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n = min(self.trunc, other.trunc)
        coeffs = {}
        for k in set(self.coeffs) | set(other.coeffs):
            if k > n:
                continue
            p = _poly_add(self.poly(k), other.poly(k))
            if p[0].size:
                coeffs[k] = p
        return LaurentSeries(self.vars, n, coeffs)

    __radd__ = __add__

    def __neg__(self):
        return LaurentSeries(self.vars, self.trunc, {k: _poly_neg(p) for k, p in self.coeffs.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, np.integer)):
            c = int(other)
            out = {}
            for k, p in self.coeffs.items():
                q = _poly_scale(p, c)
                if q[0].size:
                    out[k] = q
            return LaurentSeries(self.vars, self.trunc, out)
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        return series_mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, np.integer)):
            other = LaurentSeries.monomial(self.vars, self.trunc, coef=int(other))
        return series_div(self, other)

    def inverse(self) -> "LaurentSeries":
        return _inverse(self)


def series_mul(a: LaurentSeries, b: LaurentSeries) -> LaurentSeries:
    a._check(b)
    va, vb = a.valuation(), b.valuation()
    n = min(a.trunc + vb, b.trunc + va)
    bias = _bias_key(a.nvars)
    acc: Dict[int, list] = {}
    for i, pa in a.coeffs.items():
        for j, pb in b.coeffs.items():
            if i + j <= n:
                acc.setdefault(i + j, []).append(_poly_mul(pa, pb, bias))
    out = {}
    for k, parts in acc.items():
        if len(parts) == 1:
            p = parts[0]
        else:
            keys = np.concatenate([p[0] for p in parts])
            if any(p[1].dtype == object for p in parts) or sum(_absmax(p[1]) for p in parts) >= _I64_SAFE:
                vals = np.concatenate([_as_object(p[1]) for p in parts])
            else:
                vals = np.concatenate([p[1] for p in parts])
            p = _collect(keys, vals)
        if p[0].size:
            out[k] = p
    return LaurentSeries(a.vars, n, out)


def _unit_inverse(poly, d: int):
    """Inverse of +-monomial in the Laurent ring, or raise."""
    keys, vals = poly
    if keys.size != 1 or int(vals[0]) not in (1, -1):
        raise SeriesError("leading x-coefficient is not a unit of the Laurent ring")
    e = _unpack(keys, d)
    return _pack(-e), np.array([int(vals[0])], dtype=np.int64)


def _inverse(b: LaurentSeries) -> LaurentSeries:
    if b.is_zero():
        raise SeriesError("division by a series that is zero to its truncation order")
    v = b.valuation()
    bias = _bias_key(b.nvars)
    lead_key, lead_val = _unit_inverse(b.coeffs[v], b.nvars)
    neg_lead = (lead_key, -lead_val)
    n = b.trunc - 2 * v
    inv = {-v: (lead_key, lead_val)}
    for k in range(-v + 1, n + 1):
        acc = _EMPTY
        for j in range(1, k + v + 1):
            bj = b.coeffs.get(v + j)
            ik = inv.get(k - j)
            if bj is not None and ik is not None:
                acc = _poly_add(acc, _poly_mul(bj, ik, bias))
        if acc[0].size:
            inv[k] = _poly_mul(acc, neg_lead, bias)
    return LaurentSeries(b.vars, n, inv)


def series_div(a: LaurentSeries, b: LaurentSeries) -> LaurentSeries:
    a._check(b)
    return series_mul(a, _inverse(b))


def cf_extract(a: LaurentSeries, var, exponent: int = -1) -> LaurentSeries:
    """Coefficient of var^exponent; ``var`` may also be a sequence of variables."""
    names = [var] if isinstance(var, str) else list(var)
    for nm in names:
        if nm not in a.vars:
            raise ValueError(f"{nm} is not a variable of this series")
    return a.cf({nm: exponent for nm in names})


def substitute_monomial(a: LaurentSeries, assignments: Mapping[str, Mapping[str, object]],
                        new_vars: Sequence[str] | None = None) -> LaurentSeries:
    """Replace x and each variable by a monomial in x and ``new_vars``.

    ``assignments`` maps a name ('x' or a variable of ``a``) to a dict of
    exponents, e.g. ``{'t': {'x': 1, 't': -1}}`` for t -> x/t.  Exponents may
    be fractions as long as every resulting term has integer exponents.
    Unlisted names map to themselves.
    """
    new_vars = a.vars if new_vars is None else tuple(new_vars)
    names = ("x",) + a.vars
    img = {}
    for nm in names:
        mono = assignments.get(nm, {nm: 1})
        for key in mono:
            if key != "x" and key not in new_vars:
                raise ValueError(f"{key} is not among the target variables")
        img[nm] = [Fraction(mono.get("x", 0))] + [Fraction(mono.get(v, 0)) for v in new_vars]
    if img["x"][0] <= 0:
        raise SeriesError("x must map to a positive power of x")
    for nm in a.vars:
        if img[nm][0] < 0:
            raise SeriesError("substitution would produce negative x-powers")
    d = len(new_vars)
    grouped: Dict[int, list] = {}
    for k, (keys, vals) in a.coeffs.items():
        e = _unpack(keys, a.nvars)
        for row, c in zip(e, vals):
            tot = [img["x"][j] * k for j in range(d + 1)]
            for i, nm in enumerate(a.vars):
                for j in range(d + 1):
                    tot[j] += img[nm][j] * int(row[i])
            if any(t.denominator != 1 for t in tot):
                raise SeriesError("substitution produces a fractional exponent")
            tot = [int(t) for t in tot]
            grouped.setdefault(tot[0], []).append((tot[1:], c))
    # variable images carry no negative x, so unknown input orders land at
    # x-order >= (trunc + 1) * img_x
    new_trunc = math.ceil((a.trunc + 1) * img["x"][0]) - 1
    terms = [(k, ev, c) for k, items in grouped.items() for ev, c in items if k <= new_trunc]
    return LaurentSeries.from_terms(new_vars, new_trunc, terms)


def geometric(m: LaurentSeries, trunc: int) -> LaurentSeries:
    """1 / (1 - m) for a series m of positive x-valuation."""
    if m.valuation() < 1:
        raise SeriesError("geometric series needs positive x-valuation")
    one = LaurentSeries.one(m.vars, trunc)
    out = one
    power = one
    for _ in range(trunc // m.valuation() + 1):
        power = (power * m).truncate(trunc)
        if power.is_zero():
            break
        out = out + power
    return out.truncate(trunc)
