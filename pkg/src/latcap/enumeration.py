"""Exact counting of primitive lattice triangulations in strips.

Regions live in a strip ``0 <= w <= m`` (``m`` is the width) and extend in
the ``l`` direction.  A region is bounded below by a *bottom path* and above
by a *top path*; both are continuous piecewise-linear lattice paths from the
wall ``w = 0`` to the wall ``w = m`` with strictly increasing ``w`` and
primitive segments.  Rectangles and the trapezoids ``T4(a, e)``,
``T5,lam(a0, a5)`` are all of this form.

Two independent counters are provided:

* :func:`enumerate_brute` -- an advancing-front search that places the
  unique triangle on the smallest open front edge.  Exponential; used as the
  oracle on small regions.
* :class:`ShapeCounter` -- a sweep over top paths ("shapes").  A
  triangulation is decomposed into *units* (a triangle, or the two triangles
  sharing an interior vertical edge); the units that touch the top path from
  below are removable and the count follows by inclusion-exclusion over
  compatible sets of removable units.  Counts are memoised per top path, so
  ``f(m, 1..N)`` share one table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

Point = tuple[int, int]
Path = tuple[Point, ...]

KINDS = ("rectangle", "trapezoid4", "trapezoid5")

# brute force guard (number of primitive triangles = 2 * area)
BRUTE_MAX_TRIANGLES = 26


class RegionError(ValueError):
    """Malformed region description."""


class BudgetExceeded(RuntimeError):
    """Raised when a DP exceeds its state budget."""

    def __init__(self, msg: str, high_water: int):
        super().__init__(f"{msg} (state high-water mark {high_water})")
        self.high_water = high_water


@dataclass(frozen=True)
class RegionSpec:
    kind: str
    m: int
    n: int = 0
    profile: tuple[int, ...] = ()
    forbid_side_to_side: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RegionError(f"unknown region kind {self.kind!r}")
        if self.m < 1:
            raise RegionError("width m must be >= 1")
        if self.n < 0:
            raise RegionError("height n must be >= 0")
        if self.kind == "trapezoid4":
            if self.m != 4 or len(self.profile) != 2 or min(self.profile) < 0:
                raise RegionError("trapezoid4 needs m=4 and profile (a, e) with a, e >= 0")
        if self.kind == "trapezoid5":
            if self.m != 5 or len(self.profile) not in (3, 4):
                raise RegionError("trapezoid5 needs m=5 and profile (lam, a0, a5) or (lam, mu, a0, a5)")
            lam = self.profile[0]
            if lam not in (1, 2) or min(self.profile[-2:]) < 0:
                raise RegionError("trapezoid5 needs lam in {1, 2} and a0, a5 >= 0")
            if len(self.profile) == 4 and self.profile[1] not in (1, 2):
                raise RegionError("trapezoid5 needs mu in {1, 2}")


def rectangle(m: int, n: int, forbid_side_to_side: bool = False) -> RegionSpec:
    return RegionSpec("rectangle", m, n, (), forbid_side_to_side)


def trapezoid4(a: int, e: int, forbid_side_to_side: bool = False) -> RegionSpec:
    return RegionSpec("trapezoid4", 4, a + e, (a, e), forbid_side_to_side)


def trapezoid5(lam: int, mu: int, a0: int, a5: int, forbid_side_to_side: bool = False) -> RegionSpec:
    return RegionSpec("trapezoid5", 5, a0 + a5, (lam, mu, a0, a5), forbid_side_to_side)


def trapezoid5_mu(lam: int, a0: int, a5: int) -> int | None:
    """The ``mu`` with ``a0 - lam = a5 +- mu (mod 5)``, or None if the top edge is not primitive."""
    r = (a0 - lam - a5) % 5
    return {1: 1, 4: 1, 2: 2, 3: 2}.get(r)


def region_paths(region: RegionSpec) -> tuple[Path, Path] | None:
    """Bottom and top path of a region, or None when the region is empty by convention."""
    if region.kind == "rectangle":
        m, n = region.m, region.n
        return tuple((w, 0) for w in range(m + 1)), tuple((w, n) for w in range(m + 1))
    if region.kind == "trapezoid4":
        a, e = region.profile
        if (a + e) % 2:
            return None
        return ((0, 0), (4, 1)), ((0, a), (4, 1 + e))
    lam, a0, a5 = region.profile[0], region.profile[-2], region.profile[-1]
    mu = trapezoid5_mu(lam, a0, a5)
    if mu is None or (len(region.profile) == 4 and region.profile[1] != mu):
        return None
    return ((0, 0), (5, lam)), ((0, a0), (5, lam + a5))


def _cross(o: Point, a: Point, b: Point) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _primitive_steps(a: Point, b: Point) -> list[Point]:
    """Lattice points on segment ab, a included, b excluded."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    g = math.gcd(dx, dy)
    if g == 0:
        return []
    sx, sy = dx // g, dy // g
    return [(a[0] + k * sx, a[1] + k * sy) for k in range(g)]


def _polygon(bottom: Path, top: Path) -> list[Point]:
    """Counter-clockwise boundary with every boundary lattice point listed."""
    corners = list(bottom)
    m = bottom[-1][0]
    corners += [(m, y) for y in range(bottom[-1][1] + 1, top[-1][1] + 1)]
    corners += list(reversed(top))[1:]
    corners += [(0, y) for y in range(top[0][1] - 1, bottom[0][1] - 1, -1)]
    pts: list[Point] = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        for p in _primitive_steps(a, b):
            if not pts or pts[-1] != p:
                pts.append(p)
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts.pop()
    return pts


def _twice_area(poly: Sequence[Point]) -> int:
    return sum(a[0] * b[1] - a[1] * b[0] for a, b in zip(poly, list(poly[1:]) + [poly[0]]))


def _inside_strict(poly: Sequence[Point], p: Point) -> bool:
    # convex-free even-odd test; p is assumed not on the boundary
    x, y = p
    inside = False
    for a, b in zip(poly, list(poly[1:]) + [poly[0]]):
        if (a[1] > y) != (b[1] > y):
            # x-coordinate of the crossing compared exactly
            lhs = (x - a[0]) * (b[1] - a[1])
            rhs = (b[0] - a[0]) * (y - a[1])
            if (b[1] - a[1] > 0 and lhs < rhs) or (b[1] - a[1] < 0 and lhs > rhs):
                inside = not inside
    return inside


def _proper_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 and ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0


def enumerate_brute(region: RegionSpec, max_triangles: int = BRUTE_MAX_TRIANGLES) -> int:
    """Count primitive triangulations by an advancing-front search.

    The open front is the boundary of the uncovered part, oriented with the
    uncovered side on the left.  The smallest front edge lies in exactly one
    triangle of any triangulation, so branching over its admissible apex
    counts every triangulation once.
    """
    paths = region_paths(region)
    if paths is None:
        return 0
    bottom, top = paths
    if bottom == top:
        return 0 if region.kind != "rectangle" and region.forbid_side_to_side else 1
    poly = _polygon(bottom, top)
    area2 = _twice_area(poly)
    if area2 <= 0:
        raise RegionError("degenerate region")
    if area2 > max_triangles:
        raise BudgetExceeded(f"region has {area2} triangles, brute force limit is {max_triangles}", area2)
    m = region.m
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    on_boundary = set(poly)
    interior = {
        (x, y)
        for x in range(min(xs), max(xs) + 1)
        for y in range(min(ys), max(ys) + 1)
        if (x, y) not in on_boundary and _inside_strict(poly, (x, y))
    }
    boundary_edges = {(a, b) for a, b in zip(poly, poly[1:] + poly[:1])}
    forbid = region.forbid_side_to_side
    box = (min(xs), max(xs), min(ys), max(ys))

    def is_s2s(a: Point, b: Point) -> bool:
        return {a[0], b[0]} == {0, m}

    def apexes(a: Point, b: Point) -> Iterable[Point]:
        dx, dy = b[0] - a[0], b[1] - a[1]
        # c = a + (p, q) with dx*q - dy*p = 1
        g, u, v = _ext_gcd(dx, -dy)
        assert g in (1, -1)
        q0, p0 = u * g, v * g
        for k in range(-(box[1] - box[0] + box[3] - box[2]) - 2, box[1] - box[0] + box[3] - box[2] + 3):
            c = (a[0] + p0 + k * dx, a[1] + q0 + k * dy)
            if box[0] <= c[0] <= box[1] and box[2] <= c[1] <= box[3]:
                yield c

    def search(front: frozenset, fresh: frozenset) -> int:
        if not front:
            return 1
        a, b = min(front)
        front_pts = {p for e in front for p in e}
        total = 0
        for c in apexes(a, b):
            if c not in front_pts and c not in fresh:
                continue
            new_front = set(front)
            new_front.discard((a, b))
            ok = True
            for e_in, e_out in (((b, c), (c, b)), ((c, a), (a, c))):
                if e_in in new_front:
                    new_front.discard(e_in)
                elif e_out in new_front:
                    ok = False
                    break
                else:
                    if forbid and is_s2s(*e_out) and e_out not in boundary_edges and e_in not in boundary_edges:
                        ok = False
                        break
                    new_front.add(e_out)
            if not ok:
                continue
            if any(
                _proper_cross(b, c, p, q) or _proper_cross(c, a, p, q) for (p, q) in front
            ):
                continue
            total += search(frozenset(new_front), fresh - {c})
        return total

    return search(frozenset(boundary_edges), frozenset(interior))


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with a*x + b*y = g."""
    if b == 0:
        return a, 1, 0
    g, x, y = _ext_gcd(b, a % b)
    return g, y, x - (a // b) * y


class ShapeCounter:
    """Memoised shape recursion over top paths for a fixed bottom path.

    ``count(top)`` is the number of primitive triangulations of the region
    between ``bottom`` and ``top``.  With ``forbid_side_to_side`` the interior
    edges joining the walls ``w = 0`` and ``w = m`` are excluded.
    """

    def __init__(self, bottom: Path, forbid_side_to_side: bool = False, max_states: int = 5_000_000):
        self.bottom = tuple(bottom)
        self.m = self.bottom[-1][0]
        self.forbid = forbid_side_to_side
        self.max_states = max_states
        self.memo: dict[Path, int] = {self.bottom: 1}
        # bottom segment covering each integer w (left end preferred)
        self._bseg = {}
        for w in range(self.m + 1):
            for i in range(len(self.bottom) - 1):
                (w1, _), (w2, _) = self.bottom[i], self.bottom[i + 1]
                if w1 <= w <= w2:
                    self._bseg[w] = i
                    break

    @property
    def states(self) -> int:
        return len(self.memo)

    def _above_bottom(self, p: Point) -> bool:
        i = self._bseg[p[0]]
        a, b = self.bottom[i], self.bottom[i + 1]
        return _cross(a, b, p) >= 0

    def _segment_ok(self, a: Point, c: Point) -> bool:
        # segment ac must not pass below any bottom vertex strictly inside its w-range
        for v in self.bottom:
            if a[0] < v[0] < c[0] and _cross(a, c, v) > 0:
                return False
        return True

    def _candidates(self, path: Path) -> list[tuple[int, int, tuple]]:
        """Removable units as (first segment, last segment, modification)."""
        m = self.m
        r = len(path) - 1
        out = []
        for i, (w, y) in enumerate(path):
            low = (w, y - 1)
            if i == 0:
                if r >= 1 and path[1][0] == 1 and self._above_bottom(low):
                    out.append((0, 0, ("set", 0, low)))
            elif i == r:
                if path[r - 1][0] == m - 1 and self._above_bottom(low):
                    out.append((r - 1, r - 1, ("set", r, low)))
            else:
                a, c = path[i - 1], path[i + 1]
                if a[0] == w - 1 and c[0] == w + 1 and self._above_bottom(low):
                    out.append((i - 1, i, ("set", i, low)))
                if _cross(a, c, (w, y)) == 1 and self._segment_ok(a, c):
                    out.append((i - 1, i, ("drop", i, None)))
        for i in range(r):
            a, c = path[i], path[i + 1]
            dx, dy = c[0] - a[0], c[1] - a[1]
            if dx >= 2:
                p = pow(dy % dx, -1, dx)
                q = (dy * p - 1) // dx
                apex = (a[0] + p, a[1] + q)
                if self._above_bottom(apex) and self._segment_ok(a, apex) and self._segment_ok(apex, c):
                    out.append((i, i, ("insert", i, apex)))
        out.sort(key=lambda t: (t[0], t[1]))
        return out

    @staticmethod
    def _apply(path: Path, mods: list[tuple]) -> Path:
        sets = {}
        drops = set()
        inserts = {}
        for kind, i, pt in mods:
            if kind == "set":
                sets[i] = pt
            elif kind == "drop":
                drops.add(i)
            else:
                inserts[i] = pt
        out = []
        for i, v in enumerate(path):
            if i in drops:
                continue
            out.append(sets.get(i, v))
            if i in inserts:
                out.append(inserts[i])
        return tuple(out)

    def count(self, top: Sequence[Point]) -> int:
        top = tuple(top)
        if not self._valid(top):
            raise RegionError("top path is not a valid shape above the bottom path")
        return self._count(top)

    def _valid(self, path: Path) -> bool:
        if path[0][0] != 0 or path[-1][0] != self.m:
            return False
        for a, c in zip(path, path[1:]):
            if c[0] <= a[0] or math.gcd(c[0] - a[0], c[1] - a[1]) != 1:
                return False
        if not all(self._above_bottom(v) for v in path):
            return False
        return all(self._segment_ok(a, c) for a, c in zip(path, path[1:]))

    def _count(self, path: Path) -> int:
        memo = self.memo
        hit = memo.get(path)
        if hit is not None:
            return hit
        if len(memo) >= self.max_states:
            raise BudgetExceeded("shape DP state budget exceeded", len(memo))
        cands = self._candidates(path)
        total = 0
        # inclusion-exclusion over sets of candidates using disjoint segments
        stack = [(0, -1, [], 0)]
        while stack:
            start, last_seg, chosen, size = stack.pop()
            for k in range(start, len(cands)):
                lo, hi, mod = cands[k]
                if lo <= last_seg:
                    continue
                sel = chosen + [mod]
                child = self._apply(path, sel)
                if self.forbid and len(child) == 2 and child != self.bottom:
                    val = 0
                else:
                    val = self._count(child)
                total += val if size % 2 == 0 else -val
                stack.append((k + 1, hi, sel, size + 1))
        memo[path] = total
        return total


_rect_counters: dict[tuple[int, bool], ShapeCounter] = {}


def _rect_counter(m: int, forbid: bool = False) -> ShapeCounter:
    key = (m, forbid)
    if key not in _rect_counters:
        _rect_counters[key] = ShapeCounter(tuple((w, 0) for w in range(m + 1)), forbid)
    return _rect_counters[key]


def count_rectangle(m: int, n: int, max_states: int = 5_000_000, forbid_side_to_side: bool = False) -> int:
    """Exact ``f(m, n)`` by the shape DP (sweeping along the longer side)."""
    if m < 0 or n < 0:
        raise RegionError("rectangle sides must be non-negative")
    if m == 0 or n == 0:
        return 1
    if not forbid_side_to_side:
        m, n = min(m, n), max(m, n)
    counter = _rect_counter(m, forbid_side_to_side)
    counter.max_states = max_states
    top = tuple((w, n) for w in range(m + 1))
    return counter.count(top)


def count_region(region: RegionSpec, max_states: int = 5_000_000) -> int:
    """Exact count for any supported region via the shape DP."""
    if region.kind == "rectangle":
        return count_rectangle(region.m, region.n, max_states, region.forbid_side_to_side)
    return count_trapezoid(region, max_states)


_trap_counters: dict[tuple[Path, bool], ShapeCounter] = {}


def count_trapezoid(region: RegionSpec, max_states: int = 5_000_000) -> int:
    """``j*_{a,e}``, ``j_{a,e}`` (width 4) or ``l*_{lam mu}``, ``l_{lam mu}`` (width 5)."""
    if region.kind not in ("trapezoid4", "trapezoid5"):
        raise RegionError("count_trapezoid needs a trapezoid region")
    paths = region_paths(region)
    if paths is None:
        return 0
    bottom, top = paths
    if bottom == top:
        # degenerate trapezoid: j*_{0,0} = 1, j_{0,0} = 0
        return 0 if region.forbid_side_to_side else 1
    key = (bottom, region.forbid_side_to_side)
    if key not in _trap_counters:
        _trap_counters[key] = ShapeCounter(bottom, region.forbid_side_to_side)
    counter = _trap_counters[key]
    counter.max_states = max_states
    return counter.count(top)


def trapezoid4_series(order: int, forbid_side_to_side: bool) -> list[int]:
    """Coefficients of ``J`` (forbid=True) or ``J*`` (forbid=False) up to ``x^order``."""
    out = []
    for n in range(order + 1):
        out.append(sum(count_trapezoid(trapezoid4(a, n - a, forbid_side_to_side)) for a in range(n + 1)))
    return out


def trapezoid5_series(lam: int, mu: int, order: int, forbid_side_to_side: bool) -> list[int]:
    """Coefficients of ``L_{lam mu}`` (forbid=True) or ``L*_{lam mu}`` up to ``x^order``."""
    out = []
    for n in range(order + 1):
        out.append(
            sum(count_trapezoid(trapezoid5(lam, mu, a0, n - a0, forbid_side_to_side)) for a0 in range(n + 1))
        )
    return out


@dataclass
class ConvexityReport:
    m: int
    ns: list[int]
    violations: list[int] = field(default_factory=list)
    # (n, (n+1) c_{m,n+1} - n c_{m,n})
    lower_bounds: list[tuple[int, float]] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations


def check_convexity(m: int, values: dict[int, int] | Sequence[int] | None = None, n_range: Iterable[int] | None = None) -> ConvexityReport:
    """Check ``f(m,n-1) f(m,n+1) >= f(m,n)^2`` on a range of ``n``.

    ``values`` maps n to f(m, n) (a sequence is taken as f(m, 0), f(m, 1), ...).
    Missing values are computed with :func:`count_rectangle` when ``values`` is None.
    """
    if values is None:
        if n_range is None:
            raise ValueError("need values or n_range")
        ns = sorted(set(n_range))
        lo, hi = ns[0] - 1, ns[-1] + 1
        values = {k: count_rectangle(m, k) for k in range(max(lo, 0), hi + 1)}
    elif not isinstance(values, dict):
        values = dict(enumerate(values))
    if n_range is None:
        keys = sorted(values)
        ns = [k for k in keys if k - 1 in values and k + 1 in values]
    else:
        ns = sorted(set(n_range))
    report = ConvexityReport(m, ns)
    for n in ns:
        if n - 1 not in values or n + 1 not in values or n not in values:
            raise KeyError(f"missing f({m}, n) around n={n}")
        if values[n - 1] * values[n + 1] < values[n] ** 2:
            report.violations.append(n)
    for n in sorted(values):
        if n >= 1 and n + 1 in values and values[n] > 0 and values[n + 1] > 0:
            c_n = math.log2(values[n]) / (m * n)
            c_n1 = math.log2(values[n + 1]) / (m * (n + 1))
            report.lower_bounds.append((n, (n + 1) * c_n1 - n * c_n))
    return report
