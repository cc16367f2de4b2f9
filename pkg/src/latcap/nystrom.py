"""Nystroem discretisation of the eliminated shape equations.

Replacing every coefficient extraction cf_{w^-1} by the quadrature sum
sum_k c_k F(z_k) over a node grid turns the width-4 equations for g1(s,u),
g2(t,u), h3(s) into a linear system with 2n^2 + n unknowns.  Each coupling
is stored as a dense n^3 tensor and applied by tensor contraction, which is
exactly the sparse matrix product without index bookkeeping; ``to_sparse``
produces the explicit CSR matrix when needed.

Solves use GMRES in double precision.  Iterative refinement recomputes the
residual with tensors assembled in a wider type (80-bit extended on x86), so
the answer can be more accurate than the base solve.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres

from . import _accel
from .kernels import eval_poly, kernel_polys, residue_phi
from .quadrature import NodeGrid, make_grid

__all__ = [
    "PrecisionConfig",
    "Width4System",
    "assemble_width4",
    "solve_refined",
    "eval_J",
    "SolveResult",
    "SolveError",
    "Width5System",
    "assemble_width5",
    "eval_Lmatrix",
    "ContractionReport",
    "reduced_operators",
    "contraction_norms",
    "certify_contraction",
]


class SolveError(ArithmeticError):
    """Raised when the linear solve diverges or the result is not real."""


@dataclass(frozen=True)
class PrecisionConfig:
    """Digits of the base solve and of the residual in refinement.

    Up to 16 digits runs in complex128; up to 19 digits uses the extended
    complex type numpy exposes as ``clongdouble`` (80-bit on x86).
    """

    base_digits: int = 16
    refine_digits: int = 19
    max_refinements: int = 6
    target_residual: float = 1e-19
    gmres_rtol: float = 1e-13

    def __post_init__(self):
        if self.base_digits > 16:
            raise ValueError("base solves run in double precision (at most 16 digits)")
        if self.refine_digits > 19:
            raise ValueError("refinement residuals support at most 19 digits (extended precision)")
        if self.refine_digits < self.base_digits:
            raise ValueError("refine_digits must be at least base_digits")
        if self.target_residual <= 0:
            raise ValueError("target_residual must be positive")

    @property
    def base_dtype(self):
        return np.complex128

    @property
    def refine_dtype(self):
        if self.refine_digits <= 16 or np.finfo(np.longdouble).precision < 18:
            return np.complex128
        return np.clongdouble


def _grid_as(grid: NodeGrid, dtype) -> NodeGrid:
    if grid.nodes.dtype == np.dtype(dtype):
        return grid
    return make_grid(grid.n, grid.b, grid.quarter_shift, dtype=dtype)


# --------------------------------------------------------------------------
# width 4

@dataclass
class Width4System:
    """Discrete width-4 system: unknowns g1 (n x n), g2 (n x n), h3 (n)."""

    x: float
    grid: NodeGrid
    psi1: np.ndarray
    psi2: np.ndarray
    psi3: np.ndarray
    A1: np.ndarray
    B1: np.ndarray
    C1: np.ndarray
    A2: np.ndarray
    B2: np.ndarray
    C2: np.ndarray
    D3: np.ndarray
    E3: np.ndarray
    rhs: np.ndarray
    timings: Dict[str, float] = field(default_factory=dict)

    width = 4

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def size(self) -> int:
        return 2 * self.n ** 2 + self.n

    @property
    def dtype(self):
        return self.A1.dtype

    def blocks(self):
        """Layout: name -> (offset, shape)."""
        n = self.n
        return {"g1": (0, (n, n)), "g2": (n * n, (n, n)), "h3": (2 * n * n, (n,))}

    def split(self, vec):
        n = self.n
        return vec[: n * n].reshape(n, n), vec[n * n: 2 * n * n].reshape(n, n), vec[2 * n * n:]

    def matvec(self, vec):
        g1, g2, h3 = self.split(np.asarray(vec, dtype=self.dtype))
        y1, y2, y3 = _accel.width4_apply(self, g1, g2, h3)
        return np.concatenate([y1.ravel(), y2.ravel(), y3])

    def diagonal(self):
        return np.concatenate([self.psi1.ravel(), self.psi2.ravel(), self.psi3])

    @property
    def nnz(self) -> int:
        n = self.n
        # g1 rows: n (g1) + n (g2) + 1 (h3) + diagonal; g2 rows: 2n (g1) + n (h3) + diagonal
        # h3 rows: n (g1) + n^2 (g2) + diagonal.  Coinciding entries counted once.
        return self.to_sparse().nnz if n <= 24 else (n * n * (2 * n + 1) + n * n * (3 * n) + n * (n + n * n)
                                                     + 2 * n * n + n)

    def to_sparse(self) -> sp.csr_matrix:
        """Explicit CSR matrix of the system."""
        n = self.n
        N = self.size
        rows, cols, vals = [], [], []
        I = np.arange(n)
        ii, jj, kk = np.meshgrid(I, I, I, indexing="ij")
        g1 = lambda i, j: i * n + j
        g2 = lambda a, j: n * n + a * n + j
        h3 = lambda i: 2 * n * n + i
        # diagonal
        rows.append(np.arange(N))
        cols.append(np.arange(N))
        vals.append(self.diagonal())
        # g1 equations
        rows += [g1(ii, jj).ravel(), g1(ii, jj).ravel(), g1(I[:, None], I[None, :]).ravel()]
        cols += [g1(ii, kk).ravel(), g2(kk, jj).ravel(), h3(np.broadcast_to(I[:, None], (n, n))).ravel()]
        vals += [self.A1.ravel(), self.B1.ravel(), self.C1.ravel()]
        # g2 equations (ii plays a, kk the summed node)
        rows += [g2(ii, jj).ravel(), g2(ii, jj).ravel(), g2(ii, jj).ravel()]
        cols += [g1(kk, jj).ravel(), g1(kk, ii).ravel(), h3(kk).ravel()]
        vals += [self.A2.ravel(), self.B2.ravel(), self.C2.ravel()]
        # h3 equations
        rows += [h3(np.broadcast_to(I[:, None], (n, n))).ravel(), h3(ii).ravel()]
        cols += [g1(I[:, None], I[None, :]).ravel(), g2(jj, kk).ravel()]
        vals += [self.D3.ravel(), self.E3.ravel()]
        m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
        return m.tocsr()

    def j1(self, vec):
        """x^2 cf_{s^-1 u^-1} g1(s,u)/u from a solution vector."""
        g1 = self.split(vec)[0]
        c = self.grid.cf
        return self.x ** 2 * np.einsum("i,j,ij->", c, c / self.grid.nodes, g1)


def _phi1_grid(x, s, u, dtype):
    return residue_phi(4, "q", "t", x, {"s": s, "u": u}, dtype)


def _phi3_on(x, s, grid_out: NodeGrid, dtype):
    """Phi_3(s) = cf_u u Phi_1(s, u) by an outer quadrature."""
    u = grid_out.nodes[None, :]
    phi1 = _phi1_grid(x, s[:, None], u, dtype)
    return np.sum(grid_out.cf * u * phi1, axis=-1)


def assemble_width4(x: float, grid: NodeGrid, dtype=np.complex128, outer_factor: int = 4) -> Width4System:
    """Discretise the eliminated width-4 equations at real x in (0, 1/2)."""
    if not 0 < x < 0.5:
        raise ValueError("x must lie in (0, 1/2)")
    t0 = time.perf_counter()
    grid = _grid_as(grid, dtype)
    K = kernel_polys(4)
    xd = np.longdouble(x) if dtype == np.clongdouble else float(x)
    z, c = grid.nodes, grid.cf
    n = grid.n
    P = eval_poly(K["p"], xd, {"s": z[:, None], "u": z[None, :]})           # P[i,j] = p(z_i, z_j)
    R = eval_poly(K["r"], xd, {"t": z[:, None], "u": z[None, :]})           # R[a,j] = r(z_a, z_j)
    Q = _accel.q_tensor4(K["q"], xd, z)                                     # Q[k,i,j] = q(t_k, s_i, u_j)
    t1 = time.perf_counter()
    phi1 = _phi1_grid(xd, z[:, None], z[None, :], dtype)                    # [i,j] = Phi1(s_i,u_j)
    phi2 = residue_phi(4, "q", "s", xd, {"t": z[:, None], "u": z[None, :]}, dtype)
    gout = make_grid(max(outer_factor * n, 64), grid.b, grid.quarter_shift, dtype=dtype)
    phi3 = _phi3_on(xd, z, gout, dtype)
    t2 = time.perf_counter()
    s_i = z[:, None]
    u_j = z[None, :]
    psi1 = 1 - xd * xd / s_i * P * phi1
    psi2 = 1 - xd * xd / (z[:, None] * u_j) * R * phi2
    psi3 = 1 - xd ** 4 / z ** 2 * phi3
    invQ = 1 / Q
    invP = 1 / P
    x2, x3 = xd * xd, xd ** 3
    # invQ[k,i,j] -> arrange as needed
    Qkij = invQ                                  # (k, i, j)
    Qijk = np.transpose(invQ, (1, 2, 0))         # [i,j,k] = 1/q(t_k, s_i, u_j)
    A1 = -x2 * (u_j / s_i)[:, :, None] * c[None, None, :] * (P[:, None, :] * Qijk - invP[:, :, None])
    B1 = -x2 * (1 - xd / u_j)[:, :, None] * c[None, None, :] * (
        (1 - xd / z)[None, None, :] * Qijk + invP[:, :, None])
    C1 = -xd * u_j * psi1 / (s_i * P)
    # g2 equations: [a,j,k] with q(t_a, s_k, u_j) = invQ[a,k,j]
    Qajk = np.transpose(invQ, (0, 2, 1))
    A2 = -(x2 / u_j)[:, :, None] * c[None, None, :] * (P.T[None, :, :] * Qajk + (1 / (1 - xd / z))[:, None, None])
    # B2 uses p(s_k, t_a) = P[k,a]
    B2 = -(x2 / z)[:, None, None] * c[None, None, :] * (P.T[:, None, :] * Qajk + (1 / (1 - xd / u_j))[:, :, None])
    C2 = x3 * (c / z)[None, None, :] * Qajk
    D3 = -2 * xd * c[None, :] * psi1
    # E3[i,a,j] = x^3 c_a c_j r(t_a,u_j) / q(t_a, s_i, u_j) = invQ[a,i,j]
    E3 = x3 * np.transpose(invQ, (1, 0, 2)) * (c[:, None] * c[None, :] * R)[None, :, :]
    rhs = np.concatenate([(1 / (x2 * P)).ravel(), np.zeros(n * n, dtype=dtype), np.zeros(n, dtype=dtype)])
    t3 = time.perf_counter()
    sysm = Width4System(xd, grid, psi1, psi2, psi3, A1, B1, C1, A2, B2, C2, D3, E3, rhs)
    sysm.timings = {"kernels": t1 - t0, "phi": t2 - t1, "tensors": t3 - t2}
    return sysm


# --------------------------------------------------------------------------
# solver

@dataclass
class SolveResult:
    x: np.ndarray
    residuals: List[float]
    refinements: int
    gmres_iterations: List[int]


def _gmres(op, rhs, diag, rtol, restart=60, maxiter=20):
    n = rhs.size
    A = LinearOperator((n, n), matvec=op, dtype=np.complex128)
    inv = 1 / diag
    M = LinearOperator((n, n), matvec=lambda v: inv * v, dtype=np.complex128)
    count = [0]

    def cb(_):
        count[0] += 1

    sol, info = gmres(A, rhs, rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter, M=M,
                      callback=cb, callback_type="pr_norm")
    if info < 0:
        raise SolveError("GMRES breakdown")
    return sol, count[0]


def solve_refined(system, prec: PrecisionConfig = PrecisionConfig(), high=None) -> SolveResult:
    """Solve by GMRES with iterative refinement.

    ``high`` is the same system assembled in the refinement type; when
    omitted the residual is computed with ``system`` itself.
    """
    high = system if high is None else high
    base = system
    rhs_hi = high.rhs
    bnorm = float(np.linalg.norm(rhs_hi.astype(np.complex128)))
    X = np.zeros(high.size, dtype=high.dtype)
    res_hist: List[float] = []
    its: List[int] = []
    lo_op = lambda v: base.matvec(v.astype(base.dtype))
    diag = base.diagonal().astype(np.complex128)
    grow = 0
    best_x, best_r = X, np.inf
    for k in range(prec.max_refinements + 1):
        r = rhs_hi - high.matvec(X)
        rn = float(np.linalg.norm(r.astype(np.complex128))) / bnorm
        res_hist.append(rn)
        if rn < best_r:
            best_x, best_r = X, rn
        if rn <= prec.target_residual or k == prec.max_refinements:
            break
        if len(res_hist) > 1:
            prev = res_hist[-2]
            if rn > 2 * prev:
                # a clear increase; a second one in a row means divergence
                grow += 1
                if grow >= 2:
                    raise SolveError("iterative refinement diverges")
            elif rn > 0.5 * prev:
                # no contraction: rounding floor of the residual type reached
                break
            else:
                grow = 0
        scale = float(np.max(np.abs(r)))
        d, it = _gmres(lo_op, (r / scale).astype(np.complex128), diag, prec.gmres_rtol)
        its.append(it)
        X = X + (d * scale).astype(high.dtype)
    X = best_x
    return SolveResult(X, res_hist, len(its), its)


def eval_J(x: float, grid: NodeGrid, prec: PrecisionConfig = PrecisionConfig(),
           return_info: bool = False):
    """J at the argument x^4, i.e. x^4 j1(x), from the discrete width-4 solution.

    The real part is returned.  ``info['imag']`` holds the discarded
    imaginary part, a measure of the quadrature aliasing error.
    """
    if x == 0:
        return (0.0, {}) if return_info else 0.0
    base = assemble_width4(x, grid, prec.base_dtype)
    high = base if prec.refine_dtype == prec.base_dtype else assemble_width4(x, grid, prec.refine_dtype)
    res = solve_refined(base, prec, high)
    j1 = high.j1(res.x)
    J = x ** 4 * j1
    info = {"imag": abs(complex(J).imag), "residuals": res.residuals, "gmres": res.gmres_iterations,
            "timings": base.timings}
    val = np.real(J)
    return (val, info) if return_info else val


# --------------------------------------------------------------------------
# width 5
#
# Index letters: t -> a, s -> i, u -> j, v -> k; summed nodes l (and m).
# Unknowns G1[i,j,k] = g1(s,u,v), G2[a,j,k] = g2(t,u,v), H3[a,k] = h3(t,v),
# H4[i,k] = h4(s,v), H5[i,j] = h5(s,u), J2[k] = j2(v).

@dataclass
class Width5System:
    """Discrete width-5 system; the two rows of L share the operator."""

    x: float
    grid: NodeGrid
    lam: int
    diag_blocks: Dict[str, np.ndarray]
    T: Dict[str, np.ndarray]
    rhs_by_lam: Dict[int, np.ndarray]
    aux: Dict[str, np.ndarray]
    timings: Dict[str, float] = field(default_factory=dict)

    width = 5

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def size(self) -> int:
        n = self.n
        return 2 * n ** 3 + 3 * n ** 2 + n

    @property
    def dtype(self):
        return self.T["g1_g1"].dtype

    @property
    def rhs(self):
        return self.rhs_by_lam[self.lam]

    def with_lambda(self, lam: int) -> "Width5System":
        if lam not in (1, 2):
            raise ValueError("lambda must be 1 or 2")
        return Width5System(self.x, self.grid, lam, self.diag_blocks, self.T, self.rhs_by_lam, self.aux,
                            self.timings)

    def blocks(self):
        n = self.n
        out, off = {}, 0
        for name, shape in (("g1", (n, n, n)), ("g2", (n, n, n)), ("h3", (n, n)), ("h4", (n, n)),
                            ("h5", (n, n)), ("j2", (n,))):
            out[name] = (off, shape)
            off += int(np.prod(shape))
        return out

    def split(self, vec):
        return {name: vec[off: off + int(np.prod(shape))].reshape(shape)
                for name, (off, shape) in self.blocks().items()}

    def join(self, parts):
        return np.concatenate([parts[name].ravel() for name in self.blocks()])

    def diagonal(self):
        d = self.diag_blocks
        return self.join(d)

    def matvec(self, vec):
        return self._apply_numpy(np.asarray(vec, dtype=self.dtype))

    def _apply_numpy(self, vec):
        U = self.split(vec)
        G1, G2, H3, H4, H5, J2 = U["g1"], U["g2"], U["h3"], U["h4"], U["h5"], U["j2"]
        T, d = self.T, self.diag_blocks
        es = np.einsum
        y1 = (d["g1"] * G1 - T["g1_h4"] * H4[:, None, :] - T["g1_h5"] * H5[:, :, None]
              - es("ijkl,jil->ijk", T["g1_g1"], G1)
              - T["g1_h3"] * es("l,lk->k", self.grid.cf, H3)[None, None, :]
              - es("ijkl,kil->ijk", T["g1_g2a"], G2)
              - es("ijkl,ljk->ijk", T["g1_w"], G2) * self.aux["R1"][None, :, :]
              + es("ijkl,jl->ijk", T["g1_w"], H4) * (self.x * self.grid.nodes)[None, None, :])
        y2 = (d["g2"] * G2 - T["g2_h3"] * H3[:, None, :] - T["g2_h4"] * H4.T[:, :, None]
              - es("ajkl,jla->ajk", T["g2_g1a"], G1)
              - es("ajkl,kla->ajk", T["g2_g2"], G2)
              - es("ajkl,ljk->ajk", T["g2_g1b"], G1)
              + es("ajkl,lk->ajk", T["g2_h4b"], H4)
              + es("ajkl,lj->ajk", T["g2_h5"], H5))
        y4 = (d["h4"] * H4
              - es("ikm,imk->ik", T["h4_g1d"], G1)
              - es("ikl,kil->ik", T["h4_g2d"], G2)
              + es("iklm,mil->ik", T["h4_g1"], G1)
              + es("iklm,lmk->ik", T["h4_g2"], G2)
              - es("ikm,im->ik", T["h4_h5"], H5)
              - es("iklm,ml->ik", T["h4_h4"], H4))
        y5 = (d["h5"] * H5
              - es("ijm,ijm->ij", T["h5_g1a"], G1)
              - es("ijl,jil->ij", T["h5_g1b"], G1)
              - es("ijm,im->ij", T["h5_h4a"], H4)
              - es("ijl,jl->ij", T["h5_h4b"], H4)
              + es("ijlm,ljm->ij", T["h5_g2a"], G2)
              + es("ijlm,mil->ij", T["h5_g2b"], G2))
        y3 = d["h3"] * H3 - es("akl,kla->ak", T["h3_g2"], G2) - T["h3_j2"] * J2[:, None]
        yj = d["j2"] * J2 - es("klm,lmk->k", T["j2_g1"], G1)
        return self.join({"g1": y1, "g2": y2, "h3": y3, "h4": y4, "h5": y5, "j2": yj})

    def to_sparse(self) -> sp.csr_matrix:
        """Explicit matrix by probing with unit vectors (small grids only)."""
        N = self.size
        if N > 20000:
            raise ValueError("explicit matrix only for small grids")
        eye = np.eye(N, dtype=self.dtype)
        cols = [self.matvec(eye[:, j]) for j in range(N)]
        return sp.csr_matrix(np.array(cols).T)

    def l_row(self, vec):
        """(l1, l2) for this lambda."""
        U = self.split(vec)
        c = self.grid.cf
        x = self.x
        l1 = x * np.sum(c * U["j2"])
        l2 = x ** 4 * np.einsum("a,k,ak->", c, c, U["h3"]) + x ** 2 * np.einsum("i,k,ik->", c, c, U["h4"])
        if self.lam == 1:
            l2 = l2 + 1
        return l1, l2


def assemble_width5(x: float, grid: NodeGrid, lam: int = 1, dtype=np.complex128,
                    outer_factor: int = 4) -> Width5System:
    """Discretise the eliminated width-5 equations at real x in (0, 1/2)."""
    if lam not in (1, 2):
        raise ValueError("lambda must be 1 or 2")
    if not 0 < x < 0.5:
        raise ValueError("x must lie in (0, 1/2)")
    t0 = time.perf_counter()
    grid = _grid_as(grid, dtype)
    xd = np.longdouble(x) if dtype == np.clongdouble else float(x)
    K = kernel_polys(5)
    z, c, n = grid.nodes, grid.cf, grid.n
    e = [None] * 4

    def ax(*pos):
        # broadcast z along the listed axes of a 4d array
        shape = [1, 1, 1, 1]
        for p in pos:
            shape[p] = n
        return z.reshape(shape)

    # kernel tables
    Q = eval_poly(K["q"], xd, {"t": ax(0), "s": ax(1), "u": ax(2), "v": ax(3)})      # [a,i,j,k]
    iQ = 1 / Q
    z3 = lambda p: z.reshape([n if q == p else 1 for q in range(3)])
    P1 = eval_poly(K["p1"], xd, {"s": z3(0), "u": z3(1), "v": z3(2)})             # [i,j,k]
    P2 = eval_poly(K["p2"], xd, {"t": z3(0), "u": z3(1), "v": z3(2)})             # [a,j,k]
    R1 = eval_poly(K["r1"], xd, {"u": z[:, None], "v": z[None, :]})               # [j,k]
    P1 = np.broadcast_to(P1, (n, n, n))
    P2 = np.broadcast_to(P2, (n, n, n))
    R1 = np.broadcast_to(R1, (n, n))
    iP1, iP2 = 1 / P1, 1 / P2
    t1 = time.perf_counter()
    phi1 = residue_phi(5, "q", "t", xd, {"s": z3(0), "u": z3(1), "v": z3(2)}, dtype)   # [i,j,k]
    phi2 = residue_phi(5, "q", "s", xd, {"t": z3(0), "u": z3(1), "v": z3(2)}, dtype)   # [a,j,k]
    phi1 = np.broadcast_to(phi1, (n, n, n))
    phi2 = np.broadcast_to(phi2, (n, n, n))
    go = make_grid(max(outer_factor * n, 64), grid.b, grid.quarter_shift, dtype=dtype)
    w = go.nodes
    # Phi13(s,v) = cf_u u Phi1(s,u,v); Phi14(s,u) = cf_v v Phi1(s,u,v)
    ph = residue_phi(5, "q", "t", xd, {"s": z[:, None, None], "u": w[None, None, :], "v": z[None, :, None]}, dtype)
    phi13 = np.sum(go.cf * w * ph, axis=-1)                                     # [i,k]
    ph = residue_phi(5, "q", "t", xd, {"s": z[:, None, None], "u": z[None, :, None], "v": w[None, None, :]}, dtype)
    phi14 = np.sum(go.cf * w * ph, axis=-1)                                     # [i,j]
    phi0 = residue_phi(5, "r1", "v", xd, {"u": z}, dtype)                       # [j]
    t2 = time.perf_counter()

    x2, x3, x4 = xd * xd, xd ** 3, xd ** 4
    zi = z[:, None, None]            # first axis of a 3d array
    zj = z[None, :, None]
    zk = z[None, None, :]
    psi1 = 1 - x2 / zi * P1 * phi1
    psi2 = 1 - x2 / (zi * zj) * P2 * phi2
    psi13 = 1 - x4 * (1 - xd / z[None, :]) / (z[:, None] ** 2 * z[None, :]) * phi13
    psi14 = 1 - x4 / (z[:, None] * z[None, :]) * phi14
    psi0 = 1 - x2 / z * phi0
    onev = 1 - xd / z                # 1 - x/v (or 1 - x/t) at a node
    cl = c                            # weights on the summed node

    T = {}
    # g1 equation, row [i,j,k], summed t = l
    iQ_ijkl = np.transpose(iQ, (1, 2, 3, 0))                                    # [i,j,k,l] = 1/q(t_l,s_i,u_j,v_k)
    P1_jil = np.transpose(P1, (1, 0, 2))                                         # [i,j,l] -> p1(u_j,s_i,t_l)
    T["g1_h4"] = psi1 * iP1 * (xd * zj * onev[None, None, :])
    T["g1_h5"] = psi1 * iP1 * (xd * zk)
    T["g1_g1"] = (x2 * (zk / zi))[..., None] * cl * (P1_jil[:, :, None, :] * iQ_ijkl - iP1[..., None])
    T["g1_h3"] = x3 * onev[None, None, :] * iP1
    R1_il = R1                                                                   # r1(s_i,t_l) = R1[i,l]
    T["g1_g2a"] = (x2 * zj / zi * onev[None, None, :])[..., None] * cl * (
        R1_il[:, None, None, :] * iQ_ijkl - iP1[..., None])
    T["g1_w"] = cl * (x2 * onev[None, None, None, :] * iQ_ijkl + x2 * iP1[..., None])
    # g2 equation, row [a,j,k], summed s = l
    iQ_ajkl = np.transpose(iQ, (0, 2, 3, 1))                                    # [a,j,k,l] = 1/q(t_a,s_l,u_j,v_k)
    T["g2_h3"] = xd * onev[None, None, :] / R1[None, :, :] * np.ones((n, 1, 1))
    T["g2_h4"] = xd * zk * psi2 / R1[None, :, :]                                 # times H4[j,a]
    P1_jla = np.transpose(P1, (2, 0, 1))                                         # [a,j,l] = p1(u_j,s_l,t_a)
    T["g2_g1a"] = (x2 * zk / (zi * zj))[..., None] * cl * (P1_jla[:, :, None, :] * iQ_ajkl
                                                         - (1 / R1)[None, :, :, None])
    P2_kla = np.transpose(P2, (2, 0, 1))                                         # [a,k,l] = p2(v_k,s_l,t_a)
    T["g2_g2"] = (x2 / z)[:, None, None, None] * cl * P2_kla[:, None, :, :] * iQ_ajkl
    P1_ljk = np.transpose(P1, (1, 2, 0))                                         # [j,k,l] = p1(s_l,u_j,v_k)
    T["g2_g1b"] = (x2 / zj)[..., None] * cl * (P1_ljk[None] * iQ_ajkl + (1 / onev)[:, None, None, None])
    T["g2_h4b"] = (x3 * onev)[None, None, :, None] * cl * iQ_ajkl
    T["g2_h5"] = (x3 * zk / zj)[..., None] * cl * (iQ_ajkl + iP2[..., None])
    # h4 equation, row [i,k], summed t = l and u = m
    iQ_iklm = np.transpose(iQ, (1, 3, 0, 2))                                    # [i,k,l,m] = 1/q(t_l,s_i,u_m,v_k)
    cc = cl[:, None] * cl[None, :]
    T["h4_g1d"] = (xd / (z[:, None] * z[None, :]))[:, :, None] * cl * np.transpose(psi1, (0, 2, 1))   # [i,k,m]
    T["h4_g2d"] = (xd / z)[:, None, None] * cl * np.transpose(psi2, (1, 0, 2))   # [i,k,l] psi2(v_k,s_i,t_l)
    P1_mil = np.transpose(P1, (1, 2, 0))                                         # [i,l,m] = p1(u_m,s_i,t_l)
    si = z[:, None, None, None]
    T["h4_g1"] = (x3 / si) * cc * (1 / (si * onev[None, :, None, None]) + P1_mil[:, None, :, :] * iQ_iklm / si)
    P2_lmk = np.transpose(P2, (2, 0, 1))                                         # [k,l,m] = p2(t_l,u_m,v_k)
    T["h4_g2"] = (x3 / si) * cc * P2_lmk[None] * iQ_iklm / z[None, :, None, None]
    T["h4_h5"] = cl * (x2 / (z[:, None] * onev[None, :]))[:, :, None] + cl * (x4 / z[:, None, None] ** 2) * np.transpose(phi1, (0, 2, 1))
    T["h4_h4"] = (x4 / si) * cc * onev[None, None, :, None] * iQ_iklm
    # h5 equation, row [i,j], summed t = l and v = m
    iQ_ijlm = np.transpose(iQ, (1, 2, 0, 3))                                    # [i,j,l,m] = 1/q(t_l,s_i,u_j,v_m)
    T["h5_g1a"] = (xd / zj) * cl * psi1                                          # [i,j,m]
    T["h5_g1b"] = (xd / zi) * cl * np.transpose(psi1, (1, 0, 2))                 # [i,j,l] psi1(u_j,s_i,t_l)
    T["h5_h4a"] = cl * (x2 + x4 / zi * onev[None, None, :] * phi1)               # [i,j,m]
    T["h5_h4b"] = cl * (x2 + x4 / zj * onev[None, None, :] * np.transpose(phi1, (1, 0, 2)))  # [i,j,l]
    P2_ljm = P2                                                                  # [l,j,m]
    T["h5_g2a"] = (x3 / zj)[..., None] * cc * (1 + np.transpose(P2_ljm, (1, 0, 2))[None] * iQ_ijlm)
    P2_mil = np.transpose(P2, (1, 2, 0))                                         # [i,l,m] = p2(v_m,s_i,t_l)
    T["h5_g2b"] = (x3 / zi)[..., None] * cc * (1 + P2_mil[:, None, :, :] * iQ_ijlm)
    # h3 and j2
    T["h3_g2"] = (xd / z)[:, None, None] * cl * np.ones((n, n, 1))               # [a,k,l]
    T["h3_j2"] = (xd / onev)[None, :] * np.ones((n, 1))                          # [a,k]
    T["j2_g1"] = (x2 / z)[:, None, None] * cc[None] / z[None, None, :]           # [k,l,m]
    T = {k: np.ascontiguousarray(np.broadcast_to(v, v.shape), dtype=dtype) for k, v in T.items()}

    ones2 = np.ones((n, n), dtype=dtype)
    diag = {"g1": np.ascontiguousarray(psi1), "g2": np.ascontiguousarray(psi2), "h3": ones2,
            "h4": psi13.astype(dtype), "h5": psi14.astype(dtype), "j2": np.ones(n, dtype=dtype)}
    zero = {"g1": np.zeros((n, n, n), dtype), "g2": np.zeros((n, n, n), dtype), "h3": np.zeros((n, n), dtype),
            "h4": np.zeros((n, n), dtype), "h5": np.zeros((n, n), dtype), "j2": np.zeros(n, dtype)}
    r1 = dict(zero)
    r1["g1"] = np.ascontiguousarray(iP1 / x2)
    r2 = dict(zero)
    r2["h4"] = (x2 / (z[:, None] * onev[None, :])) * np.ones((n, n))
    r2["j2"] = x3 * np.sum((c / (z * psi0))[:, None] / R1, axis=0)
    aux = {"R1": np.ascontiguousarray(R1, dtype=dtype), "psi0": psi0}
    sysm = Width5System(float(x), grid, lam, diag, T, {}, aux)
    sysm.rhs_by_lam[1] = sysm.join(r1).astype(dtype)
    sysm.rhs_by_lam[2] = sysm.join(r2).astype(dtype)
    t3 = time.perf_counter()
    sysm.timings = {"kernels": t1 - t0, "phi": t2 - t1, "tensors": t3 - t2}
    return sysm


def eval_Lmatrix(x: float, grid: NodeGrid, prec: PrecisionConfig = PrecisionConfig(refine_digits=16),
                 return_info: bool = False, sym_tol: float | None = None):
    """The 2x2 matrix L at the argument x^5 from both discrete width-5 solves."""
    if x == 0:
        L = np.zeros((2, 2))
        return (L, {"symmetry_defect": 0.0}) if return_info else L
    base = assemble_width5(x, grid, 1, prec.base_dtype)
    high = base if prec.refine_dtype == prec.base_dtype else assemble_width5(x, grid, 1, prec.refine_dtype)
    L = np.zeros((2, 2), dtype=complex)
    hist = {}
    for lam in (1, 2):
        b, h = base.with_lambda(lam), high.with_lambda(lam)
        res = solve_refined(b, prec, h)
        l1, l2 = h.l_row(res.x)
        scale = x ** (5 * (2 - lam))
        L[lam - 1] = [complex(l1) * scale, complex(l2) * scale]
        hist[lam] = res.residuals
    defect = abs(L[0, 1].real - L[1, 0].real)
    if sym_tol is not None and defect > sym_tol:
        raise SolveError(f"symmetry defect {defect:.3e} above tolerance")
    info = {"symmetry_defect": defect, "imag": float(np.max(np.abs(L.imag))), "residuals": hist,
            "timings": base.timings}
    return (L.real, info) if return_info else L.real


# --------------------------------------------------------------------------
# contraction certificates for the width-4 operator

@dataclass
class ContractionReport:
    xs: List[float]
    norms: Dict[str, List[float]]
    bounds: Dict[str, float]

    def max(self, name: str) -> float:
        return max(self.norms[name])

    @property
    def violations(self) -> Dict[str, float]:
        return {k: self.max(k) for k, b in self.bounds.items() if self.max(k) > b}

    @property
    def ok(self) -> bool:
        return not self.violations


CONTRACTION_BOUNDS = {"K22": 0.06, "K1hat": 0.83, "K2hat": 0.53, "Ttilde64": 0.7}


def _hs(M, wr, wc):
    """L2 norm of the kernel behind the Nystroem matrix M (rows weight wr, columns wc)."""
    return float(np.sqrt(np.sum(np.abs(M) ** 2 * wr[:, None] / wc[None, :])))


def reduced_operators(S: Width4System) -> Dict[str, np.ndarray]:
    """Dense blocks of the system after eliminating h3 and dividing by Psi.

    g1 = T11h g1 + (T12h + T12) g2 + phi,
    g2 = (T21h + T21p + T21) g1 + T22 g2, all as n^2 x n^2 matrices acting on
    values at the grid (row-major (first, second) variable order).
    """
    n = S.n
    N = n * n
    I = np.arange(n)
    p1, p2, p3 = S.psi1, S.psi2, S.psi3
    dt = S.dtype
    T11h = np.zeros((n, n, n, n), dtype=dt)                  # [i,j | i',k]
    T11h[I, :, I, :] = -S.A1 / p1[:, :, None] + (S.C1 / p1)[:, :, None] * (S.D3 / p3[:, None])[:, None, :]
    T12h = np.zeros((n, n, n, n), dtype=dt)                  # [i,j | k,j']
    T12h[:, I, :, I] = np.transpose(-S.B1 / p1[:, :, None], (1, 0, 2))
    T12 = ((S.C1 / p1)[:, :, None, None] * (S.E3 / p3[:, None, None])[:, None, :, :])
    T21h = np.zeros((n, n, n, n), dtype=dt)                  # [a,j | k,j]
    T21h[:, I, :, I] = np.transpose(-S.A2 / p2[:, :, None], (1, 0, 2))
    T21p = np.zeros((n, n, n, n), dtype=dt)                  # [a,j | k,a]
    T21p[I, :, :, I] = -S.B2 / p2[:, :, None]
    C2s = S.C2 / p2[:, :, None] / p3[None, None, :]          # [a,j,k]
    T21 = C2s[:, :, :, None] * S.D3[None, None, :, :]       # [a,j | k,j']
    T22 = np.einsum("ajk,kbl->ajbl", C2s, S.E3)
    out = {"T11h": T11h, "T12h": T12h, "T12": T12, "T21h": T21h, "T21p": T21p, "T21": T21, "T22": T22}
    out = {k: v.reshape(N, N) for k, v in out.items()}
    out["phi"] = (S.rhs[:N].reshape(n, n) / p1).ravel()
    return out


def contraction_norms(x: float, grid: NodeGrid, power: int = 64) -> Dict[str, float]:
    """The four discrete norms at one x (all zero at x = 0)."""
    if x == 0:
        return {k: 0.0 for k in CONTRACTION_BOUNDS}
    if power & (power - 1):
        raise ValueError("power must be a power of two")
    S = assemble_width4(x, grid)
    n, N = S.n, S.n ** 2
    R = reduced_operators(S)
    w = np.abs(grid.weights).astype(np.float64)
    w = w / w.sum()
    w2 = (w[:, None] * w[None, :]).ravel()
    Id = np.eye(N)
    out = {"K22": _hs(R["T22"], w2, w2)}
    # K1hat = T12h T21h acts in the first variable for each fixed second one
    K1 = (R["T12h"] @ R["T21h"]).reshape(n, n, n, n)
    K2 = R["T11h"].reshape(n, n, n, n)
    out["K1hat"] = max(_hs(K1[:, j, :, j], w, w) for j in range(n))
    out["K2hat"] = max(_hs(K2[i, :, i, :], w, w) for i in range(n))
    G = R["T11h"] + (R["T12h"] + R["T12"]) @ np.linalg.solve(Id - R["T22"], R["T21h"] + R["T21p"] + R["T21"])
    T1 = K1.reshape(N, N)
    T2 = R["T11h"]
    Tt = np.linalg.solve(Id - T1, np.linalg.solve(Id - T2, Id - G)) - Id
    sq = np.sqrt(w2)
    M = sq[:, None] * Tt / sq[None, :]
    for _ in range(int(np.log2(power))):
        M = M @ M
    out["Ttilde64"] = float(np.linalg.norm(M, 2))
    return out


def certify_contraction(x_max: float | None = None, grid: NodeGrid | None = None, samples: int = 6,
                        xs: List[float] | None = None) -> ContractionReport:
    """Largest discrete operator norms over sampled x in [0, x_max].

    Exceeding a bound is reported in the result, not raised.
    """
    if x_max is None:
        x_max = 0.05414 ** 0.25
    grid = make_grid(32, 1 / 3, True) if grid is None else grid
    if xs is None:
        xs = list(np.linspace(0.0, x_max, samples))
    norms: Dict[str, List[float]] = {k: [] for k in CONTRACTION_BOUNDS}
    for x in xs:
        vals = contraction_norms(float(x), grid)
        for k in norms:
            norms[k].append(vals[k])
    return ContractionReport([float(v) for v in xs], norms, dict(CONTRACTION_BOUNDS))
