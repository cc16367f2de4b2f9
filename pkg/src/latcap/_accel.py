"""Hot loops of the discrete solvers, with numba and plain numpy versions.

Set ``LATCAP_NUMBA=0`` to force the numpy path.  The compiled versions only
handle complex128; extended-precision arrays always take the numpy path,
since numba has no 80-bit complex type.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised through the env flag
    import numba
    from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

__all__ = ["use_numba", "q_tensor4", "width4_apply", "width5_apply", "HAVE_NUMBA"]


def use_numba() -> bool:
    return HAVE_NUMBA and os.environ.get("LATCAP_NUMBA", "1") not in ("0", "false", "no")


# --------------------------------------------------------------------------
# polynomial tensor q(t_k, s_i, u_j)

def _q_tensor_numpy(xexp, exps, coef, x, z):
    n = z.size
    t = z[:, None, None]
    s = z[None, :, None]
    u = z[None, None, :]
    out = np.zeros((n, n, n), dtype=z.dtype)
    for m in range(coef.size):
        out += (coef[m] * x ** int(xexp[m])) * t ** int(exps[m, 0]) * s ** int(exps[m, 1]) * u ** int(exps[m, 2])
    return out


if HAVE_NUMBA:
    @njit(cache=True)
    def _q_tensor_numba(cx, pt, ps, pu):
        # cx[a] = coefficient times x power; pt[a,k] = z_k^(t exponent of term a), etc.
        m, n = pt.shape
        out = np.empty((n, n, n), dtype=np.complex128)
        w = np.empty(m, dtype=np.complex128)
        for k in range(n):
            for i in range(n):
                for a in range(m):
                    w[a] = cx[a] * pt[a, k] * ps[a, i]
                for j in range(n):
                    acc = 0.0 + 0.0j
                    for a in range(m):
                        acc += w[a] * pu[a, j]
                    out[k, i, j] = acc
        return out


def q_tensor4(pt, x, z):
    """Q[k,i,j] = q(t=z_k, s=z_i, u=z_j) for a term list over (t, s, u)."""
    if tuple(pt.vars[:3]) != ("t", "s", "u"):
        raise ValueError("expected a polynomial over (t, s, u)")
    exps = np.ascontiguousarray(pt.exps[:, :3])
    if use_numba() and z.dtype == np.complex128:
        cx = pt.coef * float(x) ** pt.xexp.astype(np.float64)
        pw = [np.ascontiguousarray(z[None, :] ** exps[:, c, None]) for c in range(3)]
        return _q_tensor_numba(cx.astype(np.complex128), *pw)
    return _q_tensor_numpy(pt.xexp, exps, pt.coef, x, z)


# --------------------------------------------------------------------------
# width-4 structured matvec

def _width4_numpy(S, g1, g2, h3):
    y1 = (S.psi1 * g1 + np.einsum("ijk,ik->ij", S.A1, g1) + np.einsum("ijk,kj->ij", S.B1, g2)
          + S.C1 * h3[:, None])
    y2 = (S.psi2 * g2 + np.einsum("ajk,kj->aj", S.A2, g1) + np.einsum("ajk,ka->aj", S.B2, g1)
          + np.einsum("ajk,k->aj", S.C2, h3))
    y3 = S.psi3 * h3 + np.einsum("ij,ij->i", S.D3, g1) + np.einsum("iaj,aj->i", S.E3, g2)
    return y1, y2, y3


if HAVE_NUMBA:
    @njit(cache=True, parallel=False)
    def _width4_numba(psi1, psi2, psi3, A1, B1, C1, A2, B2, C2, D3, E3, g1, g2, h3):
        n = g1.shape[0]
        y1 = np.empty((n, n), dtype=np.complex128)
        y2 = np.empty((n, n), dtype=np.complex128)
        y3 = np.empty(n, dtype=np.complex128)
        for i in range(n):
            for j in range(n):
                acc = psi1[i, j] * g1[i, j] + C1[i, j] * h3[i]
                for k in range(n):
                    acc += A1[i, j, k] * g1[i, k] + B1[i, j, k] * g2[k, j]
                y1[i, j] = acc
        for a in range(n):
            for j in range(n):
                acc = psi2[a, j] * g2[a, j]
                for k in range(n):
                    acc += A2[a, j, k] * g1[k, j] + B2[a, j, k] * g1[k, a] + C2[a, j, k] * h3[k]
                y2[a, j] = acc
        for i in range(n):
            acc = psi3[i] * h3[i]
            for j in range(n):
                acc += D3[i, j] * g1[i, j]
            for a in range(n):
                for j in range(n):
                    acc += E3[i, a, j] * g2[a, j]
            y3[i] = acc
        return y1, y2, y3


def width4_apply(S, g1, g2, h3):
    if use_numba() and S.A1.dtype == np.complex128:
        return _width4_numba(S.psi1, S.psi2, S.psi3, S.A1, S.B1, S.C1, S.A2, S.B2, S.C2, S.D3, S.E3,
                             np.ascontiguousarray(g1), np.ascontiguousarray(g2), np.ascontiguousarray(h3))
    return _width4_numpy(S, g1, g2, h3)


def width5_apply(S, vec):
    """Structured width-5 product; the system object carries its own numpy form."""
    return S._apply_numpy(vec)
