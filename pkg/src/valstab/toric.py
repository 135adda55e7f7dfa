"""Complete toric varieties given by fans, and their torus-invariant divisors."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations, product
from math import factorial
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ratgeom import (
    HPolytope,
    as_fraction,
    dot,
    dual_description,
    euclidean_volume,
    facet_lattice_volume,
    is_primitive,
    rank,
    solve,
)


class ToricError(ValueError):
    pass


class NotQCartierError(ToricError):
    pass


@dataclass(frozen=True)
class DivisorClass:
    """Torus-invariant Q-divisor ``sum a_rho D_rho``."""

    coeffs: tuple[Fraction, ...]

    def __init__(self, coeffs: Iterable):
        object.__setattr__(self, "coeffs", tuple(as_fraction(c) for c in coeffs))

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def __getitem__(self, i):
        return self.coeffs[i]

    def __add__(self, other: DivisorClass) -> DivisorClass:
        if len(other) != len(self):
            raise ValueError("divisor lengths differ")
        return DivisorClass(a + b for a, b in zip(self.coeffs, other.coeffs))

    def __sub__(self, other: DivisorClass) -> DivisorClass:
        return self + (-other)

    def __neg__(self) -> DivisorClass:
        return DivisorClass(-a for a in self.coeffs)

    def __mul__(self, k) -> DivisorClass:
        k = as_fraction(k)
        return DivisorClass(k * a for a in self.coeffs)

    __rmul__ = __mul__

    def __truediv__(self, k) -> DivisorClass:
        return self * (1 / as_fraction(k))

    def __str__(self):
        return "(" + ", ".join(str(a) for a in self.coeffs) + ")"


@dataclass(frozen=True)
class ToricValuation:
    """Monomial divisorial valuation given by a primitive lattice vector."""

    v: tuple[int, ...]

    def __init__(self, v: Iterable[int]):
        v = tuple(int(x) for x in v)
        if not any(v):
            raise ToricError("valuation vector must be nonzero")
        if not is_primitive(v):
            raise ToricError(f"valuation vector {v} is not primitive")
        object.__setattr__(self, "v", v)

    def __str__(self):
        return "(" + ",".join(str(x) for x in self.v) + ")"


def _as_vector(F) -> tuple[int, ...]:
    return F.v if isinstance(F, ToricValuation) else tuple(F)


@dataclass(frozen=True, eq=False)
class ToricVariety:
    """Complete fan: primitive ray generators and maximal cones (ray indices)."""

    rays: tuple[tuple[int, ...], ...]
    cones: tuple[tuple[int, ...], ...]
    name: str = ""
    named: tuple[tuple[str, DivisorClass], ...] = field(default=(), repr=False)

    def __post_init__(self):
        rays = tuple(tuple(int(x) for x in r) for r in self.rays)
        cones = tuple(tuple(sorted(int(i) for i in c)) for c in self.cones)
        object.__setattr__(self, "rays", rays)
        object.__setattr__(self, "cones", cones)
        if not rays:
            raise ToricError("fan has no rays")
        n = len(rays[0])
        for r in rays:
            if len(r) != n:
                raise ToricError(f"ray {r} has wrong length")
            if not is_primitive(r):
                raise ToricError(f"ray {r} is not primitive")
        for c in cones:
            if any(i < 0 or i >= len(rays) for i in c):
                raise ToricError(f"cone {c} references an unknown ray")
            if rank([rays[i] for i in c]) != n:
                raise ToricError(f"cone {c} is not full-dimensional")
        for name, D in self.named:
            if len(D) != len(rays):
                raise ToricError(f"class {name} has {len(D)} coefficients, expected {len(rays)}")

    # identity by fan data only, so caches keyed on the variety behave
    def _key(self):
        return (self.rays, self.cones)

    def __eq__(self, other):
        return isinstance(other, ToricVariety) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @property
    def dim(self) -> int:
        return len(self.rays[0])

    @property
    def nrays(self) -> int:
        return len(self.rays)

    @property
    def classes(self) -> dict[str, DivisorClass]:
        out = {f"D{i}": self.ray_divisor(i) for i in range(self.nrays)}
        out["K"] = canonical_class(self)
        out.update(dict(self.named))
        return out

    def ray_divisor(self, i: int) -> DivisorClass:
        return DivisorClass(1 if j == i else 0 for j in range(self.nrays))

    def zero(self) -> DivisorClass:
        return DivisorClass([0] * self.nrays)

    def principal(self, m: Sequence) -> DivisorClass:
        """``div(chi^m) = sum <m, v_rho> D_rho``."""
        return DivisorClass(dot(m, r) for r in self.rays)

    def is_simplicial(self) -> bool:
        return all(len(c) == self.dim for c in self.cones)

    @cached_property
    def walls(self) -> tuple[tuple[int, int, int], ...]:
        """``(sigma, sigma', rho')``: adjacent maximal cones and a ray of
        ``sigma'`` outside ``sigma``."""
        out = []
        for i, j in combinations(range(len(self.cones)), 2):
            common = set(self.cones[i]) & set(self.cones[j])
            if len(common) < self.dim - 1:
                continue
            if rank([self.rays[k] for k in common]) != self.dim - 1:
                continue
            for a, b in ((i, j), (j, i)):
                for r in self.cones[b]:
                    if r not in common:
                        out.append((a, b, r))
        return tuple(sorted(out))

    def is_complete(self, samples: int = 200, seed: int = 0) -> bool:
        """Sampled cone-cover check on random rational directions."""
        rng = random.Random(seed)
        for _ in range(samples):
            v = [rng.randint(-97, 97) for _ in range(self.dim)]
            if not any(v):
                continue
            if containing_cone(self, v) is None:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rank": self.dim,
            "rays": [list(r) for r in self.rays],
            "cones": [list(c) for c in self.cones],
            "classes": {k: [f"{a.numerator}/{a.denominator}" for a in D] for k, D in self.named},
        }


# ---------------------------------------------------------------------------
# cones, Cartier data, PL functions
# ---------------------------------------------------------------------------

def _in_cone(rays: Sequence[Sequence[int]], v: Sequence[int]) -> bool:
    n = len(v)
    for sub in combinations(rays, n):
        if rank(sub) != n:
            continue
        coeffs = solve([list(col) for col in zip(*sub)], list(v))
        if coeffs is not None and all(c >= 0 for c in coeffs):
            return True
    return False


def containing_cone(X: ToricVariety, v: Sequence[int]) -> int | None:
    """Index of the first maximal cone containing ``v``."""
    return _containing_cone(X, tuple(v))


@lru_cache(maxsize=65536)
def _containing_cone(X: ToricVariety, v: tuple[int, ...]) -> int | None:
    for k, c in enumerate(X.cones):
        if _in_cone([X.rays[i] for i in c], v):
            return k
    return None


@lru_cache(maxsize=65536)
def cartier_data(X: ToricVariety, D: DivisorClass) -> tuple[tuple[Fraction, ...], ...]:
    """Per maximal cone the ``m_sigma`` with ``<m_sigma, v_rho> = -a_rho``."""
    out = []
    for c in X.cones:
        a = [list(X.rays[i]) for i in c]
        b = [-D[i] for i in c]
        m = solve(a, b)
        if m is None:
            raise NotQCartierError(
                f"divisor is not Q-Cartier on cone {c}: linear data inconsistent"
            )
        out.append(tuple(m))
    return tuple(out)


def pl_value(X: ToricVariety, D: DivisorClass, v: Sequence[int]) -> Fraction:
    """``psi_D(v) = <m_sigma, v>`` on the cone containing ``v``.

    For nef ``D`` this is ``min over P_D of <u, v>``; ``-psi_D(v)`` is the
    coefficient of the exceptional divisor of ``v`` in the pullback of ``D``.
    """
    v = tuple(v)
    k = containing_cone(X, v)
    if k is None:
        raise ToricError(f"fan is not complete: {v} lies in no cone")
    return dot(cartier_data(X, D)[k], v)


def canonical_class(X: ToricVariety) -> DivisorClass:
    return DivisorClass([-1] * X.nrays)


def anticanonical(X: ToricVariety) -> DivisorClass:
    return DivisorClass([1] * X.nrays)


def log_discrepancy(X: ToricVariety, F) -> Fraction:
    """``A_X(F)``: the PL function equal to 1 on every ray, evaluated at v."""
    v = _as_vector(F)
    try:
        return pl_value(X, canonical_class(X), v)
    except NotQCartierError:
        raise NotQCartierError(
            "non-simplicial cone: log discrepancy via this formula unsupported"
        ) from None


def check_q_gorenstein(X: ToricVariety) -> bool:
    try:
        cartier_data(X, canonical_class(X))
    except NotQCartierError:
        return False
    return True


# ---------------------------------------------------------------------------
# positivity
# ---------------------------------------------------------------------------

def section_polytope(X: ToricVariety, D: DivisorClass) -> HPolytope:
    """``P_D = {u : <u, v_rho> >= -a_rho}``."""
    if len(D) != X.nrays:
        raise ToricError("divisor length does not match the fan")
    return HPolytope(X.dim, X.rays, D.coeffs)


def wall_values(X: ToricVariety, D: DivisorClass) -> tuple[Fraction, ...]:
    """``<m_sigma, v_rho'> + a_rho'`` for every wall; all >= 0 iff D nef."""
    m = cartier_data(X, D)
    return tuple(dot(m[s], X.rays[r]) + D[r] for s, _, r in X.walls)


def is_nef(X: ToricVariety, D: DivisorClass) -> bool:
    return all(w >= 0 for w in wall_values(X, D))


def is_ample(X: ToricVariety, D: DivisorClass) -> bool:
    return all(w > 0 for w in wall_values(X, D))


def volume(X: ToricVariety, D: DivisorClass) -> Fraction:
    """``Vol(D) = n! * vol(P_D)``; 0 for an empty polytope."""
    return _volume(X, D)


@lru_cache(maxsize=65536)
def _volume(X: ToricVariety, D: DivisorClass) -> Fraction:
    vp = dual_description(section_polytope(X, D))
    return factorial(X.dim) * euclidean_volume(vp)


def is_big(X: ToricVariety, D: DivisorClass) -> bool:
    return volume(X, D) > 0


# ---------------------------------------------------------------------------
# intersection numbers
# ---------------------------------------------------------------------------

def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _combine(X: ToricVariety, classes: Sequence[DivisorClass], weights: Sequence) -> DivisorClass:
    out = X.zero()
    for D, w in zip(classes, weights):
        out = out + D * w
    return out


def intersection_number(X: ToricVariety, *divisors: DivisorClass) -> Fraction:
    """Exact ``D_1 . ... . D_n`` by interpolating ``Vol(sum t_i D_i)``.

    The top self-intersection is a homogeneous polynomial of degree n in the
    weights, and agrees with the volume wherever the combination is nef.  The
    polynomial is recovered from values on a translate of the principal
    lattice ``{alpha : |alpha| = n}`` placed deep inside the nef region
    (positive weights are preferred; a weight vector with a negative entry
    is accepted only when no positive one gives a nef class).
    """
    n = X.dim
    if len(divisors) != n:
        raise ToricError(f"need exactly {n} divisors, got {len(divisors)}")
    distinct: list[DivisorClass] = []
    mult: list[int] = []
    for D in divisors:
        if D in distinct:
            mult[distinct.index(D)] += 1
        else:
            distinct.append(D)
            mult.append(1)
    k = len(distinct)

    start = None
    candidates = [t for t in product(range(-3, 9), repeat=k) if any(t)]
    candidates.sort(key=lambda t: (min(t) <= 0, sum(abs(x) for x in t), t))
    for t in candidates:
        if is_nef(X, _combine(X, distinct, t)):
            start = t
            break
    if start is None:
        raise ToricError("interpolation region empty")

    monos = list(_compositions(n, k))
    c = 1
    while True:
        nodes = [tuple(c * s + a for s, a in zip(start, alpha)) for alpha in monos]
        if all(is_nef(X, _combine(X, distinct, t)) for t in nodes):
            break
        c *= 2
        if c > 2**20:
            raise ToricError("interpolation region empty")
    values = [volume(X, _combine(X, distinct, t)) for t in nodes]
    matrix = [[_monomial(t, alpha) for alpha in monos] for t in nodes]
    coeffs = solve(matrix, values)
    if coeffs is None:
        raise ToricError("interpolation system singular")
    target = monos.index(tuple(mult))
    scale = Fraction(1)
    for m in mult:
        scale *= factorial(m)
    return coeffs[target] * scale / factorial(n)


def _monomial(t: Sequence, alpha: Sequence[int]) -> Fraction:
    out = Fraction(1)
    for x, a in zip(t, alpha):
        out *= Fraction(x) ** a
    return out


def degree_by_facets(X: ToricVariety, D: DivisorClass, L: DivisorClass) -> Fraction:
    """``D . L^(n-1) = sum d_rho * facet_lattice_volume(P_L, rho)`` for nef L."""
    P = section_polytope(X, L)
    return sum((D[i] * facet_lattice_volume(P, i) for i in range(X.nrays) if D[i] != 0),
               Fraction(0))


# ---------------------------------------------------------------------------
# Picard coordinates and nef cone
# ---------------------------------------------------------------------------

@lru_cache(maxsize=256)
def _picard_frame(X: ToricVariety) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split ray indices into n 'basis' rays (killed by linear equivalence)
    and the remaining rays whose coefficients give Picard coordinates."""
    chosen: list[int] = []
    for i, r in enumerate(X.rays):
        if rank([X.rays[j] for j in chosen] + [r]) > len(chosen):
            chosen.append(i)
        if len(chosen) == X.dim:
            break
    rest = tuple(i for i in range(X.nrays) if i not in chosen)
    return tuple(chosen), rest


def normalize_class(X: ToricVariety, D: DivisorClass) -> DivisorClass:
    """Linearly equivalent divisor vanishing on the frame rays."""
    chosen, _ = _picard_frame(X)
    m = solve([list(X.rays[i]) for i in chosen], [D[i] for i in chosen])
    return D - X.principal(m)


def picard_coordinates(X: ToricVariety, D: DivisorClass) -> tuple[Fraction, ...]:
    _, rest = _picard_frame(X)
    N = normalize_class(X, D)
    return tuple(N[i] for i in rest)


def from_picard(X: ToricVariety, coords: Sequence) -> DivisorClass:
    _, rest = _picard_frame(X)
    a = [Fraction(0)] * X.nrays
    for i, c in zip(rest, coords):
        a[i] = as_fraction(c)
    return DivisorClass(a)


def picard_rank(X: ToricVariety) -> int:
    return X.nrays - X.dim


def linearly_equivalent(X: ToricVariety, D: DivisorClass, E: DivisorClass) -> bool:
    return picard_coordinates(X, D) == picard_coordinates(X, E)


@lru_cache(maxsize=256)
def nef_cone_generators(X: ToricVariety) -> tuple[DivisorClass, ...]:
    """Extreme rays of the nef cone, as divisors in normal form."""
    from .ratgeom import extreme_rays, _scaled_row

    rho = picard_rank(X)
    basis = [from_picard(X, [1 if j == i else 0 for j in range(rho)]) for i in range(rho)]
    rows = []
    for s, _, r in X.walls:
        row = []
        for B in basis:
            m = cartier_data(X, B)[s]
            row.append(dot(m, X.rays[r]) + B[r])
        rows.append(_scaled_row(row))
    rays = extreme_rays(sorted(set(rows)), rho)
    return tuple(from_picard(X, r) for r in rays)


# ---------------------------------------------------------------------------
# divisor expressions and file IO
# ---------------------------------------------------------------------------

_TERM_RE = re.compile(
    r"\s*([+-])?\s*(\d+(?:/\d+)?(?:\.\d+)?)?\s*\*?\s*([A-Za-z_][A-Za-z0-9_]*)?\s*"
)


def parse_divisor(X: ToricVariety, text: str) -> DivisorClass:
    """Parse ``"H1+2H2"``, ``"-K"``, ``"-K + 1/100 f"``, ``"D0 - 1/2*D3"``.

    A bare list ``"1,0,2,1/3"`` is read as raw ray coefficients.
    """
    s = text.strip()
    if not s:
        raise ValueError("empty divisor expression")
    if "," in s or (s.startswith("[") and s.endswith("]")):
        parts = [p for p in s.strip("[]() ").split(",")]
        if len(parts) != X.nrays:
            raise ValueError(f"expected {X.nrays} coefficients, got {len(parts)}")
        return DivisorClass(as_fraction(p.strip()) for p in parts)
    names = X.classes
    total = X.zero()
    pos = 0
    first = True
    while pos < len(s):
        m = _TERM_RE.match(s, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse divisor {text!r} at column {pos + 1}")
        sign, coeff, name = m.groups()
        if sign is None and not first:
            raise ValueError(f"missing operator in {text!r} at column {pos + 1}")
        if coeff is None and name is None:
            raise ValueError(f"dangling operator in {text!r} at column {pos + 1}")
        k = as_fraction(coeff) if coeff else Fraction(1)
        if sign == "-":
            k = -k
        if name is None:
            raise ValueError(f"constant term without a class in {text!r} at column {pos + 1}")
        if name not in names:
            raise ValueError(f"unknown class {name!r} in {text!r}; known: {sorted(names)}")
        total = total + names[name] * k
        pos = m.end()
        first = False
    return total


def parse_valuation(text: str, n: int) -> ToricValuation:
    """``"e1"``, ``"-e2"``, ``"(0,1)"`` or ``"0,1"``."""
    s = text.strip().replace(" ", "")
    m = re.fullmatch(r"([+-]?)e(\d+)", s)
    if m:
        i = int(m.group(2))
        if not 1 <= i <= n:
            raise ValueError(f"basis index out of range in {text!r}")
        v = [0] * n
        v[i - 1] = -1 if m.group(1) == "-" else 1
        return ToricValuation(v)
    parts = s.strip("()[]").split(",")
    if len(parts) != n:
        raise ValueError(f"valuation {text!r} must have {n} entries")
    return ToricValuation(int(p) for p in parts)


def variety_from_dict(data: Mapping) -> ToricVariety:
    for key in ("rank", "rays", "cones"):
        if key not in data:
            raise ValueError(f"variety file missing key {key!r}")
    n = int(data["rank"])
    rays = [tuple(int(x) for x in r) for r in data["rays"]]
    for r in rays:
        if len(r) != n:
            raise ValueError(f"ray {list(r)} does not have rank {n}")
        if not is_primitive(r):
            raise ValueError(f"ray {list(r)} is not primitive (gcd of entries must be 1)")
    X = ToricVariety(tuple(rays), tuple(tuple(c) for c in data["cones"]), data.get("name", ""))
    named = []
    for name, spec in (data.get("classes") or {}).items():
        if isinstance(spec, str):
            D = parse_divisor(X, spec)
        else:
            D = DivisorClass(as_fraction(str(x)) for x in spec)
        named.append((name, D))
    return ToricVariety(X.rays, X.cones, X.name, tuple(named))


def load_variety(path: str | Path) -> ToricVariety:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return variety_from_dict(data)


def enumerate_valuations(n: int, budget: int) -> list[ToricValuation]:
    """Primitive vectors with sup-norm at most ``budget``, both signs kept,
    in lexicographic order."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    return [ToricValuation(v) for v in product(range(-budget, budget + 1), repeat=n)
            if any(v) and is_primitive(v)]


# ---------------------------------------------------------------------------
# standard examples
# ---------------------------------------------------------------------------

def projective_space(n: int) -> ToricVariety:
    rays = [tuple(1 if j == i else 0 for j in range(n)) for i in range(n)]
    rays.append(tuple([-1] * n))
    cones = list(combinations(range(n + 1), n))
    X = ToricVariety(tuple(rays), tuple(cones), f"P{n}")
    return ToricVariety(X.rays, X.cones, X.name, (("H", X.ray_divisor(n)),))


def product_of_lines(n: int) -> ToricVariety:
    rays = []
    for i in range(n):
        e = [0] * n
        e[i] = 1
        rays.append(tuple(e))
        rays.append(tuple(-x for x in e))
    cones = [tuple(2 * i + s for i, s in enumerate(choice)) for choice in product((0, 1), repeat=n)]
    X = ToricVariety(tuple(rays), tuple(cones), "x".join(["P1"] * n))
    named = tuple((f"H{i + 1}", X.ray_divisor(2 * i + 1)) for i in range(n))
    return ToricVariety(X.rays, X.cones, X.name, named)


def hirzebruch(a: int) -> ToricVariety:
    """``F_a`` with rays (1,0), (0,1), (-1,a), (0,-1).

    Named classes: fibre ``f = D0``, negative section ``E = D1``, and the
    nef section ``C = D3`` (linearly equivalent to ``E + a f``).
    """
    rays = ((1, 0), (0, 1), (-1, a), (0, -1))
    cones = ((0, 1), (1, 2), (2, 3), (0, 3))
    X = ToricVariety(rays, cones, f"F{a}")
    named = (("f", X.ray_divisor(0)), ("E", X.ray_divisor(1)), ("C", X.ray_divisor(3)))
    return ToricVariety(X.rays, X.cones, X.name, named)


STANDARD = {
    "P2": lambda: projective_space(2),
    "P3": lambda: projective_space(3),
    "P1xP1": lambda: product_of_lines(2),
    "P1xP1xP1": lambda: product_of_lines(3),
    "F1": lambda: hirzebruch(1),
}


def standard_variety(name: str) -> ToricVariety:
    try:
        return STANDARD[name]()
    except KeyError:
        raise ValueError(f"unknown variety {name!r}; known: {sorted(STANDARD)}") from None
