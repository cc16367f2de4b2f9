"""Command-line entry point ``latcap``.

Subcommands: count, series, kernels, capacity, extrapolate, bounds, certify.
Every run is deterministic; the only wall-clock values are the ``seconds``
columns and the ``timestamp`` field of results records.
"""

from __future__ import annotations

import argparse
import sys
import time
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import List, Sequence

import mpmath
import numpy as np

from . import asymptotics, capacity, enumeration, identities, kernels, nystrom, systems
from .cache import CountCache, ResultsLog, decimal_str, write_csv
from .quadrature import make_grid

__all__ = ["main", "build_parser", "UsageError"]

KIND_NAMES = {"rect": "rectangle", "trap4": "trapezoid4", "trap5": "trapezoid5"}


class UsageError(ValueError):
    """Flag combination that parses but cannot be honoured."""


def _ints(s: str) -> List[int]:
    return [int(v) for v in s.split(",") if v.strip()]


def _fraction(s: str) -> float:
    return float(Fraction(s))


def _emit(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {path}")


# --------------------------------------------------------------------------
# count

def _region(args) -> enumeration.RegionSpec:
    kind = KIND_NAMES[args.kind]
    prof = tuple(_ints(args.profile)) if args.profile else ()
    if kind == "rectangle":
        if args.m is None or args.n is None or prof:
            raise UsageError("rect needs --m and --n and no --profile")
        return enumeration.rectangle(args.m, args.n, args.no_s2s)
    if kind == "trapezoid4":
        if len(prof) != 2:
            raise UsageError("trap4 needs --profile a,e")
        return enumeration.trapezoid4(prof[0], prof[1], args.no_s2s)
    if len(prof) == 3:
        mu = enumeration.trapezoid5_mu(*prof)
        if mu is None:
            raise UsageError("trap5 profile has no primitive top edge")
        prof = (prof[0], mu, prof[1], prof[2])
    if len(prof) != 4:
        raise UsageError("trap5 needs --profile lam,a0,a5 or lam,mu,a0,a5")
    return enumeration.trapezoid5(*prof, forbid_side_to_side=args.no_s2s)


def cmd_count(args) -> int:
    region = _region(args)
    key = CountCache.key(args.kind, region.m, region.n, region.profile, region.forbid_side_to_side)
    cache = None if args.no_cache else CountCache()
    val = cache.get(key) if cache is not None else None
    if val is None:
        val = enumeration.count_region(region, args.max_states)
        if cache is not None:
            cache.put(key, val)
    print(val)
    return 0


# --------------------------------------------------------------------------
# series

def _series_idents(width: int, check: str) -> List[str]:
    if check == "all":
        return [k for k, v in identities.IDENTITIES.items() if v[0] == width]
    if check not in identities.IDENTITIES:
        raise UsageError(f"unknown identity {check!r}")
    if identities.IDENTITIES[check][0] != width:
        raise UsageError(f"{check} belongs to width {identities.IDENTITIES[check][0]}")
    return [check]


def cmd_series(args) -> int:
    order = args.order if args.order is not None else (12 if args.width == 4 else 8)
    if args.check:
        failed = 0
        cache: dict = {}
        rows = []
        for ident in _series_idents(args.width, args.check):
            res = identities.verify_identity(ident, order, args.lam, _cache=cache)
            ok = res.is_zero()
            failed += not ok
            rows.append((ident, order, res.nterms(), "zero" if ok else "NONZERO"))
        text = write_csv(args.out, ("identity", "order", "residual_terms", "status"), rows)
        _emit(text, args.out)
        return 1 if failed else 0
    if args.width == 4:
        fam = systems.solve_width4(order)
        scalar = {"J": systems.series_J(fam)}
    else:
        lam = args.lam or 1
        fam = systems.solve_width5(order, lam)
        l1, l2 = systems.series_L(fam)
        scalar = {f"L{lam}1": l1, f"L{lam}2": l2}
    if args.dump == "csv":
        rows = []
        for name in sorted(fam.members):
            s = fam.members[name]
            for k, ev, c in s.terms():
                rows.append((name, k, " ".join(str(e) for e in ev), c))
        text = write_csv(args.out, ("member", "x_exp", "exponents(" + " ".join(fam.vars) + ")", "coefficient"), rows)
        _emit(text, args.out)
        return 0
    rows = [(name, k, c) for name, co in scalar.items() for k, c in sorted(co.items())]
    _emit(write_csv(args.out, ("series", "power", "coefficient"), rows), args.out)
    return 0


# --------------------------------------------------------------------------
# kernels

def cmd_kernels(args) -> int:
    if args.psi_zeros:
        if args.width != 4:
            raise UsageError("--psi-zeros is available for width 4")
        rows = []
        for which in ("psi1", "psi2", "psi3"):
            root, (a, b) = kernels.psi_zero(which)
            digits = max(1, int(-np.log10(max(b - a, 1e-17) / root)))
            rows.append((which, decimal_str(root, 16), digits, decimal_str(a, 17), decimal_str(b, 17)))
        _emit(write_csv(args.out, ("psi", "zero", "digits", "lo", "hi"), rows), args.out)
        return 0
    if args.x is None:
        raise UsageError("kernels needs --x or --psi-zeros")
    g = make_grid(args.grid, args.b, not args.no_shift)
    names = ("t", "s", "u") if args.width == 4 else ("t", "s", "u", "v")
    rows = []
    for k, z in enumerate(g.nodes):
        # all torus coordinates at the same node
        vals = kernels.eval_phi_psi(args.width, args.x, {v: z for v in names})
        for name in sorted(vals):
            w = complex(np.asarray(vals[name]).ravel()[0])
            rows.append((k, repr(float(z.real)), repr(float(z.imag)), name, repr(w.real), repr(w.imag)))
    _emit(write_csv(args.out, ("node", "z_re", "z_im", "quantity", "re", "im"), rows), args.out)
    return 0


# --------------------------------------------------------------------------
# capacity

def _prec(args, width: int) -> nystrom.PrecisionConfig:
    refine = args.refine_digits if args.refine_digits is not None else (19 if width == 4 else 16)
    try:
        return nystrom.PrecisionConfig(base_digits=args.base_digits, refine_digits=refine)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _capacity_point(width, x, grid, prec):
    t0 = time.perf_counter()
    if width == 4:
        val, info = nystrom.eval_J(x, grid, prec, return_info=True)
    else:
        L, info = nystrom.eval_Lmatrix(x, grid, prec, return_info=True)
        val = float(np.linalg.det(np.eye(2) - L.astype(np.float64)))
    hist = info.get("residuals") or [0.0]
    # width 5 reports one residual history per row of L
    last = max(h[-1] for h in hist.values()) if isinstance(hist, dict) else hist[-1]
    return float(val), float(last), time.perf_counter() - t0


def cmd_capacity(args) -> int:
    if (args.x is None) == (not args.solve_root):
        raise UsageError("capacity needs exactly one of --x and --solve-root")
    prec = _prec(args, args.width)
    ns = args.nodes or ([64] if args.width == 4 else [16])
    rows, prev = [], None
    for n in ns:
        grid = make_grid(n, args.b, not args.no_shift)
        if args.x is not None:
            val, resid, sec = _capacity_point(args.width, args.x, grid, prec)
            rows.append((n, repr(args.x), repr(val), repr(resid), f"{sec:.2f}"))
            continue
        finder = capacity.find_beta4 if args.width == 4 else capacity.find_beta5
        res = finder(grid, prec)
        with mpmath.workdps(30):
            c = mpmath.mpf(res.c)
            own = max(1, int(-mpmath.log10(mpmath.mpf(res.c_err) / c))) if res.c_err > 0 else 17
            stable = min(own, capacity.common_digits(prev, c)) if prev is not None else own
            x_root = mpmath.mpf(res.beta_mid) ** (mpmath.mpf(1) / args.width)
        prev = c
        beta_s, c_s = decimal_str(res.beta_mid, stable + 1), decimal_str(c, stable + 1)
        print(f"n={n} beta={beta_s} c={c_s} stable_digits={stable}")
        rows.append((n, decimal_str(x_root, 20), decimal_str(c, 20), repr(res.c_err), f"{res.provenance['seconds']:.2f}"))
        record = {"kind": "capacity", "width": args.width, "n": n, "b": args.b, "shift": not args.no_shift,
                  "base_digits": prec.base_digits, "refine_digits": prec.refine_digits,
                  "beta": decimal_str(res.beta_mid, 22), "c": decimal_str(c, 22), "stable_digits": stable,
                  "evaluations": res.provenance["evaluations"], "seconds": res.provenance["seconds"],
                  "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
        ResultsLog(args.results).append(record)
    text = write_csv(args.csv, ("n", "x", "value", "residual", "seconds"), rows)
    _emit(text, args.csv)
    return 0


# --------------------------------------------------------------------------
# extrapolate, bounds, certify

def _read_values(path: str) -> List[int]:
    """One integer per line, or ``n value`` pairs with n = 1, 2, ... in order."""
    vals = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.replace(",", " ").split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) == 2 and int(parts[0]) != len(vals) + 1:
            raise UsageError(f"values file must list n = 1, 2, ... in order (got n={parts[0]})")
        vals.append(int(parts[-1]))
    return vals


def cmd_extrapolate(args) -> int:
    if args.values:
        vals = _read_values(args.values)
    else:
        cache = CountCache()
        vals = []
        for n in range(1, 2 * args.k + 3):
            key = CountCache.key("rect", args.m, n)
            v = cache.get(key)
            if v is None:
                v = enumeration.count_rectangle(args.m, n)
                cache.put(key, v)
            vals.append(v)
    rows = []
    kmax = min(args.k, (len(vals) - 2) // 2)
    if kmax < args.k:
        print(f"only {len(vals)} values; fitting k <= {kmax}", file=sys.stderr)
    for k, fit in asymptotics.lz_series(vals, range(1, kmax + 1), args.m).items():
        if isinstance(fit, asymptotics.FitError):
            rows.append((k, "", "", "", "singular"))
            continue
        rows.append((k, decimal_str(fit.c_est, args.digits), args.digits, str(fit.alpha),
                     "degenerate" if fit.degenerate else "ok"))
    _emit(write_csv(args.out, ("k", "estimate", "digits", "alpha", "status"), rows), args.out)
    return 0


def cmd_bounds(args) -> int:
    n = args.np
    rows = []
    for k in range(1, n + 1):
        _, val = asymptotics.np_lower_bound(n, k)
        rows.append((k, decimal_str(val, 12), 12))
    text = write_csv(args.out, ("k", "estimate", "digits"), rows)
    _emit(text, args.out)
    xm, hm = asymptotics.entropy_max()
    print(f"entropy argmax={decimal_str(xm, 12)} max={decimal_str(hm, 12)} digits=12", file=sys.stderr)
    return 0


def cmd_certify(args) -> int:
    grid = make_grid(args.nodes, args.b, not args.no_shift)
    rep = nystrom.certify_contraction(args.x_max, grid, args.samples)
    names = list(rep.bounds)
    rows = [(decimal_str(x, 8),) + tuple(decimal_str(rep.norms[k][i], 6) for k in names)
            for i, x in enumerate(rep.xs)]
    _emit(write_csv(args.out, ("x",) + tuple(names), rows), args.out)
    for k in names:
        status = "ok" if rep.max(k) <= rep.bounds[k] else "exceeds"
        print(f"{k}: max {decimal_str(rep.max(k), 6)} bound {rep.bounds[k]} {status}", file=sys.stderr)
    return 0 if rep.ok else 1


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latcap", description="Growth constants of lattice strip triangulations.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("count", help="exact count of one region")
    c.add_argument("--kind", choices=sorted(KIND_NAMES), required=True)
    c.add_argument("--m", type=int)
    c.add_argument("--n", type=int)
    c.add_argument("--profile", help="a,e (trap4) or lam,a0,a5 / lam,mu,a0,a5 (trap5)")
    c.add_argument("--no-s2s", action="store_true", help="forbid edges joining the two strip sides")
    c.add_argument("--max-states", type=int, default=5_000_000)
    c.add_argument("--no-cache", action="store_true")
    c.set_defaults(func=cmd_count)

    s = sub.add_parser("series", help="x-adic series solution and identity checks")
    s.add_argument("--width", type=int, choices=(4, 5), required=True)
    s.add_argument("--order", type=int)
    s.add_argument("--lambda", dest="lam", type=int, choices=(1, 2))
    s.add_argument("--check", metavar="ID|all")
    s.add_argument("--dump", choices=("csv",))
    s.add_argument("--out")
    s.set_defaults(func=cmd_series)

    k = sub.add_parser("kernels", help="sampled kernel values and Psi zeros")
    k.add_argument("--width", type=int, choices=(4, 5), required=True)
    k.add_argument("--x", type=float)
    k.add_argument("--psi-zeros", action="store_true")
    k.add_argument("--grid", type=int, default=8)
    k.add_argument("--b", type=_fraction, default=1 / 3)
    k.add_argument("--no-shift", action="store_true")
    k.add_argument("--out")
    k.set_defaults(func=cmd_kernels)

    a = sub.add_parser("capacity", help="discrete J or L, or the capacity root")
    a.add_argument("--width", type=int, choices=(4, 5), required=True)
    a.add_argument("--nodes", type=_ints, help="node counts, comma separated")
    a.add_argument("--b", type=_fraction, default=1 / 3)
    a.add_argument("--shift", action="store_true", default=True, help="quarter-shifted nodes (default)")
    a.add_argument("--no-shift", action="store_true")
    a.add_argument("--base-digits", type=int, default=16)
    a.add_argument("--refine-digits", type=int)
    a.add_argument("--x", type=float)
    a.add_argument("--solve-root", action="store_true")
    a.add_argument("--csv", help="convergence CSV path (stdout if omitted)")
    a.add_argument("--results", help="results log path (default in the cache directory)")
    a.set_defaults(func=cmd_capacity)

    e = sub.add_parser("extrapolate", help="rational ratio fits of f(m, n)")
    e.add_argument("--m", type=int, required=True)
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--values", help="file with f(m,1), f(m,2), ...")
    e.add_argument("--digits", type=int, default=12)
    e.add_argument("--out")
    e.set_defaults(func=cmd_extrapolate)

    b = sub.add_parser("bounds", help="non-primitive lower bounds")
    b.add_argument("--np", type=int, required=True)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    r = sub.add_parser("certify", help="discrete contraction norms")
    r.add_argument("--nodes", type=int, default=32)
    r.add_argument("--b", type=_fraction, default=1 / 3)
    r.add_argument("--no-shift", action="store_true")
    r.add_argument("--x-max", type=float)
    r.add_argument("--samples", type=int, default=6)
    r.add_argument("--out")
    r.set_defaults(func=cmd_certify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)        # unknown flags exit with status 2 before any work
    try:
        return args.func(args)
    except (UsageError, enumeration.RegionError) as e:
        print(f"latcap {args.command}: error: {e}", file=sys.stderr)
        return 2
    except enumeration.BudgetExceeded as e:
        print(f"latcap {args.command}: resource limit: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
