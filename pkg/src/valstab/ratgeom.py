"""Exact rational convex-polytope kernel.

Polytopes come in two flavours: :class:`HPolytope` (halfspaces
``<u, normal> >= -offset``) and :class:`VPolytope` (vertex lists).  Conversion
between them uses an incremental double-description method over integer
homogeneous coordinates, so no rounding happens anywhere.  Volumes and
integrals are computed from a fan triangulation rooted at the
lexicographically smallest vertex of every face.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial, gcd, lcm
from typing import Iterable, Sequence

Vector = tuple  # tuple of Fraction (points) or int (normals)

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$")


class PolytopeError(ValueError):
    """Raised on unbounded input or on a violated precondition."""


def parse_rational(text: str) -> Fraction:
    """Parse ``"p/q"``, ``"p"`` or a finite decimal string exactly."""
    m = _RATIONAL_RE.match(text)
    if m:
        num, den = m.groups()
        if den is not None and int(den) == 0:
            raise ValueError(f"zero denominator in {text!r}")
        return Fraction(int(num), int(den) if den else 1)
    try:
        value = Fraction(text.strip())
    except ValueError:
        raise ValueError(f"not a rational number: {text!r}") from None
    return value


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_rational(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


def fmt_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# small exact linear algebra
# ---------------------------------------------------------------------------

def dot(a: Sequence, b: Sequence):
    return sum(x * y for x, y in zip(a, b))


def row_echelon(rows: Sequence[Sequence]) -> list[list[Fraction]]:
    """Reduced row echelon form, zero rows dropped."""
    m = [[Fraction(x) for x in r] for r in rows]
    if not m:
        return []
    ncols = len(m[0])
    out: list[list[Fraction]] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        m[r] = [x / p for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        r += 1
        if r == len(m):
            break
    out = [row for row in m[:r]]
    return out


def rank(rows: Sequence[Sequence]) -> int:
    return len(row_echelon(rows))


def nullspace(rows: Sequence[Sequence], ncols: int) -> list[list[Fraction]]:
    """Basis of ``{x : row . x = 0 for all rows}``."""
    rref = row_echelon(rows)
    pivots = []
    for row in rref:
        pivots.append(next(i for i, x in enumerate(row) if x != 0))
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        x = [Fraction(0)] * ncols
        x[f] = Fraction(1)
        for row, p in zip(rref, pivots):
            x[p] = -row[f]
        basis.append(x)
    return basis


def solve(a: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """Solve ``a x = b`` exactly; None when inconsistent.

    For an underdetermined consistent system the free variables are set to 0.
    """
    ncols = len(a[0]) if a else 0
    aug = [list(r) + [bb] for r, bb in zip(a, b)]
    rref = row_echelon(aug)
    x = [Fraction(0)] * ncols
    for row in rref:
        p = next(i for i, v in enumerate(row) if v != 0)
        if p == ncols:
            return None
        x[p] = row[ncols]
    return x


def det(m: Sequence[Sequence]) -> Fraction:
    n = len(m)
    a = [[Fraction(x) for x in r] for r in m]
    sign = 1
    out = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if a[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            sign = -sign
        p = a[c][c]
        out *= p
        for i in range(c + 1, n):
            if a[i][c] != 0:
                f = a[i][c] / p
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return out * sign


def primitive(v: Sequence[int]) -> tuple[int, ...]:
    g = 0
    for x in v:
        g = gcd(g, x)
    if g == 0:
        return tuple(v)
    return tuple(x // g for x in v)


def to_primitive_int(v: Sequence) -> tuple[int, ...]:
    """Scale a rational vector by a positive factor to a primitive integer one."""
    den = 1
    for x in v:
        den = lcm(den, Fraction(x).denominator)
    return primitive([int(Fraction(x) * den) for x in v])


def is_primitive(v: Sequence[int]) -> bool:
    g = 0
    for x in v:
        g = gcd(g, int(x))
    return g == 1


# ---------------------------------------------------------------------------
# polytope types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HPolytope:
    """``{u : <u, normals[i]> >= -offsets[i]}``."""

    dim: int
    normals: tuple[tuple[int, ...], ...]
    offsets: tuple[Fraction, ...]

    def __post_init__(self):
        normals = tuple(tuple(int(x) for x in nv) for nv in self.normals)
        offsets = tuple(as_fraction(h) for h in self.offsets)
        if len(normals) != len(offsets):
            raise ValueError("normals and offsets differ in length")
        for nv in normals:
            if len(nv) != self.dim:
                raise ValueError(f"normal {nv} is not of dimension {self.dim}")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def from_halfspaces(cls, dim: int, halfspaces: Iterable[tuple[Sequence[int], object]]):
        hs = list(halfspaces)
        return cls(dim, tuple(tuple(h[0]) for h in hs), tuple(h[1] for h in hs))

    def contains(self, u: Sequence) -> bool:
        return all(dot(u, nv) + h >= 0 for nv, h in zip(self.normals, self.offsets))

    def intersect(self, normal: Sequence[int], offset) -> HPolytope:
        return HPolytope(self.dim, self.normals + (tuple(normal),),
                         self.offsets + (as_fraction(offset),))

    def canonical(self) -> HPolytope:
        """Irredundant halfspace form (facets only); empty input stays as is."""
        vp = dual_description(self)
        if not vp.vertices:
            return self
        return hull(vp.vertices, self.dim).halfspaces_as_h()


@dataclass(frozen=True)
class VPolytope:
    """Convex hull of ``vertices``; ``halfspaces`` is an optional H-form cache."""

    dim: int
    vertices: tuple[tuple[Fraction, ...], ...]
    halfspaces: tuple | None = field(default=None, compare=False, repr=False)

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    def halfspaces_as_h(self) -> HPolytope:
        if self.halfspaces is None:
            return hull(self.vertices, self.dim).halfspaces_as_h()
        normals, offsets = self.halfspaces
        return HPolytope(self.dim, normals, offsets)

    def with_halfspaces(self) -> VPolytope:
        if self.halfspaces is not None or not self.vertices:
            return self
        return hull(self.vertices, self.dim)


# ---------------------------------------------------------------------------
# double description
# ---------------------------------------------------------------------------

def _scaled_row(coeffs: Sequence) -> tuple[int, ...]:
    den = 1
    for x in coeffs:
        den = lcm(den, Fraction(x).denominator)
    return tuple(int(Fraction(x) * den) for x in coeffs)


def extreme_rays(rows: Sequence[Sequence[int]], d: int) -> list[tuple[int, ...]]:
    """Extreme rays of the pointed cone ``{x in R^d : row . x >= 0}``.

    Rows are integer vectors.  If the rows do not have full rank the cone is
    first intersected with the orthogonal complement of its lineality space,
    so the result describes the pointed part only.  Rows are inserted in the
    order given; the output is sorted lexicographically.
    """
    rows = [tuple(int(x) for x in r) for r in rows]
    if rank(rows) < d:
        for k in nullspace(rows, d):
            kk = to_primitive_int(k)
            rows.append(kk)
            rows.append(tuple(-x for x in kk))

    pivots: list[int] = []
    basis: list[tuple[int, ...]] = []
    for i, r in enumerate(rows):
        if not any(r):
            continue
        if rank(basis + [r]) > len(basis):
            pivots.append(i)
            basis.append(r)
            if len(basis) == d:
                break
    if len(basis) < d:  # only the origin satisfies everything
        return []

    # columns of the inverse basis matrix are the initial rays
    rays: list[tuple[int, ...]] = []
    tight: list[frozenset] = []
    for j in range(d):
        rhs = [Fraction(1 if i == j else 0) for i in range(d)]
        x = solve(basis, rhs)
        rays.append(to_primitive_int(x))
        tight.append(frozenset(p for k, p in enumerate(pivots) if k != j))

    pivot_set = set(pivots)
    for i, a in enumerate(rows):
        if i in pivot_set:
            continue
        vals = [dot(a, r) for r in rays]
        pos = [k for k, v in enumerate(vals) if v > 0]
        neg = [k for k, v in enumerate(vals) if v < 0]
        if not neg:
            tight = [t | {i} if vals[k] == 0 else t for k, t in enumerate(tight)]
            continue
        new_rays: list[tuple[int, ...]] = []
        new_tight: list[frozenset] = []
        for k, v in enumerate(vals):
            if v >= 0:
                new_rays.append(rays[k])
                new_tight.append(tight[k] | {i} if v == 0 else tight[k])
        for p in pos:
            for q in neg:
                common = tight[p] & tight[q]
                if len(common) < d - 2:
                    continue
                if any(common <= tight[r] for r in range(len(rays)) if r != p and r != q):
                    continue
                vp, vq = vals[p], -vals[q]
                ray = primitive([vp * y + vq * x for x, y in zip(rays[p], rays[q])])
                new_rays.append(ray)
                new_tight.append(common | {i})
        rays, tight = new_rays, new_tight
    return sorted(set(rays))


def _halfspace_rows(p: HPolytope) -> list[tuple[int, ...]]:
    rows = [tuple([0] * p.dim + [1])]
    for nv, h in zip(p.normals, p.offsets):
        rows.append(_scaled_row(list(nv) + [h]))
    return rows


@lru_cache(maxsize=65536)
def dual_description(p: HPolytope) -> VPolytope:
    """Exact vertex set of a bounded H-polytope.

    Raises :class:`PolytopeError` for an unbounded nonempty region; an empty
    feasible set gives an empty :class:`VPolytope`.
    """
    n = p.dim
    rays = extreme_rays(_halfspace_rows(p), n + 1)
    verts = []
    recession = False
    for r in rays:
        if r[-1] > 0:
            verts.append(tuple(Fraction(x, r[-1]) for x in r[:-1]))
        elif any(r):
            recession = True
    if verts and recession:
        raise PolytopeError("unbounded polytope")
    if verts and rank(list(p.normals)) < n:
        raise PolytopeError("unbounded polytope")
    verts = tuple(sorted(set(verts)))
    return VPolytope(n, verts, (p.normals, p.offsets) if verts else None)


def hull(points: Iterable[Sequence], dim: int) -> VPolytope:
    """Convex hull: irredundant vertices plus a facet description.

    For a lower-dimensional point set the facet description includes each
    affine equation as a pair of opposite halfspaces.
    """
    pts = sorted(set(tuple(as_fraction(x) for x in q) for q in points))
    if not pts:
        return VPolytope(dim, ())
    rows = [_scaled_row(list(q) + [1]) for q in pts]
    normals: list[tuple[int, ...]] = []
    offsets: list[Fraction] = []

    def add(vec):
        a = [Fraction(x) for x in vec[:-1]]
        if not any(a):
            return
        scale = lcm(*[x.denominator for x in a]) if a else 1
        ai = [int(x * scale) for x in a]
        g = 0
        for x in ai:
            g = gcd(g, x)
        normals.append(tuple(x // g for x in ai))
        offsets.append(Fraction(vec[-1]) * scale / g)

    for k in nullspace(rows, dim + 1):
        add(k)
        add([-x for x in k])
    for r in extreme_rays(rows, dim + 1):
        add(r)
    hp = HPolytope(dim, tuple(normals), tuple(offsets))
    if len(pts) == 1:
        return VPolytope(dim, tuple(pts), (hp.normals, hp.offsets))
    verts = dual_description(hp).vertices
    return VPolytope(dim, verts, (hp.normals, hp.offsets))


# ---------------------------------------------------------------------------
# triangulation and integration
# ---------------------------------------------------------------------------

def _affine_dim(points: Sequence[Sequence[Fraction]]) -> int:
    if not points:
        return -1
    base = points[0]
    return rank([[a - b for a, b in zip(q, base)] for q in points[1:]]) if len(points) > 1 else 0


class _FaceLattice:
    """Vertex/halfspace incidences used by the recursive fan triangulation."""

    def __init__(self, vp: VPolytope):
        vp = vp.with_halfspaces()
        self.verts = vp.vertices
        normals, offsets = vp.halfspaces
        self.tight = []
        for nv, h in zip(normals, offsets):
            t = frozenset(i for i, w in enumerate(self.verts) if dot(w, nv) + h == 0)
            if t:
                self.tight.append(t)
        self.tight = sorted(set(self.tight), key=sorted)
        self._dims: dict[frozenset, int] = {}

    def dim_of(self, face: frozenset) -> int:
        d = self._dims.get(face)
        if d is None:
            d = _affine_dim([self.verts[i] for i in sorted(face)])
            self._dims[face] = d
        return d

    def triangulate(self, face: frozenset, d: int) -> list[tuple[int, ...]]:
        if d == 0:
            return [(min(face),)]
        apex = min(face)  # vertices are sorted, so this is the lex-min vertex
        seen = set()
        out = []
        for t in self.tight:
            sub = face & t
            if apex in sub or sub in seen or sub == face:
                continue
            if self.dim_of(sub) != d - 1:
                continue
            seen.add(sub)
            for simplex in self.triangulate(sub, d - 1):
                out.append((apex,) + simplex)
        return out


@lru_cache(maxsize=8192)
def _face_lattice(p: VPolytope) -> _FaceLattice:
    return _FaceLattice(p)


def triangulate(p: VPolytope) -> list[tuple[tuple[Fraction, ...], ...]]:
    """Fan triangulation into full-dimensional simplices (empty if degenerate)."""
    if p.is_empty or _affine_dim(p.vertices) < p.dim:
        return []
    fl = _face_lattice(p)
    face = frozenset(range(len(fl.verts)))
    return [tuple(fl.verts[i] for i in s) for s in fl.triangulate(face, p.dim)]


def _simplex_volume(simplex: Sequence[Sequence[Fraction]]) -> Fraction:
    base = simplex[0]
    m = [[a - b for a, b in zip(q, base)] for q in simplex[1:]]
    return abs(det(m)) / factorial(len(m))


def euclidean_volume(p: VPolytope) -> Fraction:
    """Exact Lebesgue volume; 0 for empty or lower-dimensional input."""
    return sum((_simplex_volume(s) for s in triangulate(p)), Fraction(0))


def moments(p: VPolytope) -> tuple[Fraction, tuple[Fraction, ...]]:
    """``(vol(p), integral of u over p)`` in one triangulation pass."""
    vol = Fraction(0)
    first = [Fraction(0)] * p.dim
    for s in triangulate(p):
        v = _simplex_volume(s)
        vol += v
        k = len(s)
        for i in range(p.dim):
            first[i] += v * sum(q[i] for q in s) / k
    return vol, tuple(first)


def integrate_affine(p: VPolytope, ell: Sequence[int], c) -> Fraction:
    """``integral over p of (<u, ell> + c) du``; the integrand must be >= 0 on p."""
    c = as_fraction(c)
    for w in p.vertices:
        if dot(w, ell) + c < 0:
            raise PolytopeError("functional not nonnegative on polytope")
    total = Fraction(0)
    for s in triangulate(p):
        mean = sum(dot(q, ell) + c for q in s) / len(s)
        total += _simplex_volume(s) * mean
    return total


def slab(p: HPolytope, ell: Sequence[int], t) -> HPolytope:
    """``p`` intersected with ``{<u, ell> >= t}``."""
    return p.intersect(tuple(ell), -as_fraction(t))


def face_measure(p: VPolytope, normal: Sequence[int], offset) -> Fraction:
    """Lattice-normalised (n-1)-volume of ``p`` on ``<u, normal> = -offset``.

    The fundamental cell of the lattice in the hyperplane has measure 1.
    Returns 0 when the face is not (n-1)-dimensional.
    """
    offset = as_fraction(offset)
    n = p.dim
    if p.is_empty:
        return Fraction(0)
    on = frozenset(i for i, w in enumerate(p.vertices) if dot(w, normal) + offset == 0)
    if len(on) < n:
        return Fraction(0)
    fl = _face_lattice(p)
    if fl.dim_of(on) != n - 1:
        return Fraction(0)
    prim = primitive([int(x) for x in normal])
    j = max(range(n), key=lambda i: (abs(prim[i]), -i))
    keep = [i for i in range(n) if i != j]
    total = Fraction(0)
    if n == 1:
        return Fraction(1)
    for s in fl.triangulate(on, n - 1):
        proj = [[fl.verts[k][i] for i in keep] for k in s]
        total += _simplex_volume(proj)
    return total / abs(prim[j])


def facet_lattice_volume(p: HPolytope, facet_index: int) -> Fraction:
    """Normalised lattice volume ``(n-1)! * face_measure`` of one facet.

    This is the toric degree ``D_rho . L^(n-1)`` when ``p`` is the section
    polytope of a nef ``L`` and the facet belongs to ray ``rho``.
    """
    vp = dual_description(p)
    m = face_measure(vp, p.normals[facet_index], p.offsets[facet_index])
    return m * factorial(p.dim - 1)
