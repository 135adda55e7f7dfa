"""Perturbations of an ample class: nef-basis norm, sandwich constants, the
S-comparison bounds and the empirical modulus of beta.

The bounds ``s^-(eps) = (1 - r)^(n+1)`` and ``s^+(eps) = (1 + r)^(n+1)`` with
``r = eps^(1/2) / (1 + eps^(1/4))`` are irrational in general.  They are kept
as rational intervals built from integer square roots at a fixed decimal
scale, so every verdict uses the endpoint that is worse for the claim.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal, localcontext
from fractions import Fraction
from math import isqrt
from typing import Sequence

from .invariants import polarization, delta_toric, _candidates
from .ratgeom import as_fraction, fmt_rational, solve
from .toric import (
    DivisorClass,
    ToricVariety,
    is_ample,
    is_big,
    is_nef,
    nef_cone_generators,
    picard_coordinates,
    picard_rank,
)


class PerturbationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# nef basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NefBasis:
    """Nef classes ``A_i`` with ``L = sum t_i A_i``, ``sum t_i = 1``, ``t_i > 0``."""

    X: ToricVariety
    classes: tuple[DivisorClass, ...]
    t: tuple[Fraction, ...]

    @property
    def t0(self) -> Fraction:
        return min(self.t)

    @property
    def center(self) -> DivisorClass:
        out = self.X.zero()
        for ti, A in zip(self.t, self.classes):
            out = out + A * ti
        return out

    def coordinates(self, H: DivisorClass) -> tuple[Fraction, ...]:
        cols = [picard_coordinates(self.X, A) for A in self.classes]
        rows = [[c[i] for c in cols] for i in range(len(cols))]
        coords = solve(rows, list(picard_coordinates(self.X, H)))
        if coords is None:
            raise PerturbationError("class outside the span of the basis")
        return tuple(coords)

    def combine(self, coords: Sequence) -> DivisorClass:
        out = self.X.zero()
        for c, A in zip(coords, self.classes):
            out = out + A * as_fraction(c)
        return out


def nef_basis(X: ToricVariety, L: DivisorClass, classes: Sequence[DivisorClass] | None = None) -> NefBasis:
    """Basis of nef classes scaled so that ``L`` has coordinates summing to 1.

    Without explicit ``classes`` the nef cone generators are used, which
    requires a simplicial nef cone.
    """
    if not is_ample(X, L):
        raise PerturbationError("center of a nef basis must be ample")
    rho = picard_rank(X)
    if classes is None:
        gens = nef_cone_generators(X)
        if len(gens) != rho:
            raise PerturbationError("nef cone is not simplicial; pass an explicit basis")
        classes = sorted(gens, key=lambda g: tuple(-c for c in picard_coordinates(X, g)))
    classes = tuple(classes)
    if len(classes) != rho:
        raise PerturbationError(f"a basis needs {rho} classes, got {len(classes)}")
    for A in classes:
        if not is_nef(X, A):
            raise PerturbationError(f"basis class {A} is not nef")
    cols = [picard_coordinates(X, A) for A in classes]
    rows = [[c[i] for c in cols] for i in range(rho)]
    c = solve(rows, list(picard_coordinates(X, L)))
    if c is None or any(ci <= 0 for ci in c):
        raise PerturbationError("L is not a positive combination of the basis")
    total = sum(c)
    return NefBasis(X, tuple(A * total for A in classes), tuple(ci / total for ci in c))


def nef_basis_norm(basis: NefBasis, H: DivisorClass) -> Fraction:
    """``sum |s_i|`` for ``H = sum s_i A_i``."""
    return sum((abs(s) for s in basis.coordinates(H)), Fraction(0))


def sandwich_bound(basis: NefBasis, L: DivisorClass, L2: DivisorClass) -> Fraction:
    """``a = ||L' - L|| / t0``, after checking ``(1-a)L <= L' <= (1+a)L`` in
    the nef order."""
    a = nef_basis_norm(basis, L2 - L) / basis.t0
    X = basis.X
    if not (is_nef(X, L * (1 + a) - L2) and is_nef(X, L2 - L * (1 - a))):
        raise AssertionError("sandwich classes are not nef")
    return a


def standard_directions(basis: NefBasis) -> list[tuple[str, DivisorClass]]:
    """Unit-norm directions: ``A1, -A2, (A1 - A2)/2`` (rank 1 gives ``±A1``)."""
    A = basis.classes
    if len(A) == 1:
        return [("A1", A[0]), ("-A1", -A[0])]
    last = len(A)
    return [("A1", A[0]), ("-A2", -A[1]), (f"(A1-A{last})/2", (A[0] - A[last - 1]) / 2)]


# ---------------------------------------------------------------------------
# outward-rounded s^-, s^+
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty interval")


def _root_interval(x: Fraction, k: int, digits: int) -> Interval:
    """Interval of width 10^-digits around ``x^(1/2^k)``."""
    scale = 10 ** digits
    N = x.numerator * scale ** (2 ** k) // x.denominator
    r = N
    for _ in range(k):
        r = isqrt(r)
    return Interval(Fraction(r, scale), Fraction(r + 1, scale))


def s_bounds(eps, n: int, digits: int = 30) -> tuple[Interval, Interval, Interval]:
    """Intervals containing ``s^-(eps)``, ``s^+(eps)`` and ``r(eps)``."""
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    sq = _root_interval(eps, 1, digits)
    qu = _root_interval(eps, 2, digits)
    r = Interval(sq.lo / (1 + qu.hi), sq.hi / (1 + qu.lo))
    minus = Interval(max(Fraction(0), 1 - r.hi) ** (n + 1), max(Fraction(0), 1 - r.lo) ** (n + 1))
    plus = Interval((1 + r.lo) ** (n + 1), (1 + r.hi) ** (n + 1))
    return minus, plus, r


def fmt_decimal(x: Fraction, digits: int, rounding) -> str:
    with localcontext() as ctx:
        ctx.prec = digits + 20
        q = Decimal(x.numerator) / Decimal(x.denominator)
        return format(q.quantize(Decimal(1).scaleb(-digits), rounding=rounding), "f")


def interval_json(iv: Interval, digits: int) -> dict:
    return {"lower": fmt_decimal(iv.lo, digits, ROUND_FLOOR),
            "upper": fmt_decimal(iv.hi, digits, ROUND_CEILING),
            "rounding": "outward"}


# ---------------------------------------------------------------------------
# S estimate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValuationRecord:
    v: tuple[int, ...]
    S_L: Fraction
    S_L2: Fraction
    beta_L: Fraction | None = None
    beta_L2: Fraction | None = None


@dataclass
class PerturbationCheckResult:
    eps: Fraction
    direction: str
    s_minus: Interval
    s_plus: Interval
    records: list[ValuationRecord]
    lower_ok: bool = False
    upper_ok: bool = False
    failures: list[tuple[int, ...]] = field(default_factory=list)
    digits: int = 30
    precondition: bool = True

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok

    def recompute_flags(self) -> None:
        self.failures = [r.v for r in self.records
                         if not (self.s_minus.hi * r.S_L2 <= r.S_L <= self.s_plus.lo * r.S_L2)]
        self.lower_ok = all(self.s_minus.hi * r.S_L2 <= r.S_L for r in self.records)
        self.upper_ok = all(r.S_L <= self.s_plus.lo * r.S_L2 for r in self.records)

    def to_json(self) -> dict:
        return {
            "eps": fmt_rational(self.eps),
            "direction": self.direction,
            "precondition": self.precondition,
            "s_minus": interval_json(self.s_minus, self.digits),
            "s_plus": interval_json(self.s_plus, self.digits),
            "lower_ok": self.lower_ok,
            "upper_ok": self.upper_ok,
            "passed": self.passed,
            "failures": [list(v) for v in self.failures],
            "records": [{"v": list(r.v), "S_L": fmt_rational(r.S_L),
                         "S_L2": fmt_rational(r.S_L2)} for r in self.records],
        }


def bigness_precondition(X: ToricVariety, L: DivisorClass, H: DivisorClass, eps,
                         digits: int = 30) -> bool:
    """``L -+ c H`` big for every ``c`` in the interval around
    ``c = (1 + eps^(1/4)) eps^(1/2)``; the big cone is convex, so the two
    endpoints suffice."""
    eps = as_fraction(eps)
    sq = _root_interval(eps, 1, digits)
    qu = _root_interval(eps, 2, digits)
    c_lo, c_hi = (1 + qu.lo) * sq.lo, (1 + qu.hi) * sq.hi
    return all(is_big(X, L + H * (sign * c)) for sign in (1, -1) for c in (c_lo, c_hi))


def check_s_estimate(X: ToricVariety, L: DivisorClass, L2: DivisorClass | None = None,
                     valuations: Sequence | None = None, eps=None, *,
                     H: DivisorClass | None = None, direction: str = "",
                     budget: int = 3, digits: int = 30,
                     enforce_precondition: bool = True) -> PerturbationCheckResult:
    """``s^-(eps) S_L' <= S_L <= s^+(eps) S_L'`` on every valuation.

    Either ``L2`` or a unit direction ``H`` (with ``L' = L + eps H``) is given.
    With ``enforce_precondition=False`` an eps outside the bigness
    precondition is still evaluated and flagged in the result.
    """
    eps = as_fraction(eps)
    if L2 is None:
        if H is None:
            raise ValueError("need L2 or a direction H")
        L2 = L + H * eps
    elif H is None:
        H = (L2 - L) / eps
    if not (is_ample(X, L) and is_ample(X, L2)):
        raise PerturbationError("both classes must be ample")
    pre = bigness_precondition(X, L, H, eps, digits)
    if not pre and enforce_precondition:
        raise PerturbationError("eps too large for this direction")
    vs = [tuple(getattr(v, "v", v)) for v in valuations] if valuations is not None \
        else list(_candidates(X.dim, budget))
    P, P2 = polarization(X, L), polarization(X, L2)
    records = [ValuationRecord(v, P.S(v), P2.S(v)) for v in vs]
    minus, plus, _ = s_bounds(eps, X.dim, digits)
    out = PerturbationCheckResult(eps, direction, minus, plus, records, digits=digits,
                                  precondition=pre)
    out.recompute_flags()
    return out


# ---------------------------------------------------------------------------
# empirical modulus of beta
# ---------------------------------------------------------------------------

DECAY_SPAN = 64  # 2^-4 .. 2^-10


@dataclass
class ModulusRow:
    eps: Fraction
    f_filtered: Fraction | None
    f_all: Fraction | None
    h: Fraction | None
    zeta_L2: Fraction | None = None
    filtered: int = 0
    note: str = ""


@dataclass
class ModulusTable:
    direction: str
    rows: list[ModulusRow]
    zeta_L: Fraction
    monotone: bool = False
    decay: bool | None = False
    transfer_ok: bool = False
    transfer: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.monotone and self.decay is not False and self.transfer_ok

    def to_json(self, digits: int = 30) -> dict:
        q = lambda x: None if x is None else fmt_rational(x)
        return {
            "direction": self.direction,
            "zeta_L": q(self.zeta_L),
            "monotone": self.monotone,
            "decay": self.decay,
            "transfer_ok": self.transfer_ok,
            "passed": self.passed,
            "rows": [{"eps": q(r.eps), "f_filtered": q(r.f_filtered), "f_all": q(r.f_all),
                      "h": q(r.h), "zeta_L2": q(r.zeta_L2), "filtered": r.filtered,
                      "note": r.note} for r in self.rows],
            "transfer": self.transfer,
        }


def _modulus_row(X: ToricVariety, L: DivisorClass, L2: DivisorClass, eps: Fraction,
                 budget: int, c: Fraction) -> ModulusRow:
    n = X.dim
    P, P2 = polarization(X, L), polarization(X, L2)
    vs = _candidates(n, budget)
    bound = delta_toric(X, L2, budget).value + n * P2.mu - (n + 1) * P2.thresholds[1] + c
    f_all = Fraction(0)
    f_filt = Fraction(0)
    h = Fraction(0)
    kept = 0
    zeta = None
    for v in vs:
        S, S2 = P.S(v), P2.S(v)
        b, b2 = P.beta(v), P2.beta(v)
        d = (b - b2) / S2
        f_all = max(f_all, d)
        if b2 <= bound * S2:
            kept += 1
            f_filt = max(f_filt, d)
        h = max(h, (n * P.mu * S - n * P2.mu * S2) / (n * S2))
        zeta = b2 / S2 if zeta is None else min(zeta, b2 / S2)
    return ModulusRow(eps, f_filt, f_all, h, zeta, kept)


def measure_beta_modulus(X: ToricVariety, L: DivisorClass, H: DivisorClass, eps_grid: Sequence,
                         budget: int = 3, direction: str = "", c=1, digits: int = 30) -> ModulusTable:
    """``f(eps) = max_v max(0, (beta_L - beta_L') / S_L')`` with ``L' = L + eps H``.

    Reported on the filtered set ``beta_L' <= C_L' S_L'`` and on all budgeted
    valuations; monotonicity and decay are asserted on the filtered values.
    The transfer bound ``zeta(L') >= zeta(L) s^(-/+) - f_all`` is checked at
    every grid point.
    """
    c = as_fraction(c)
    eps_sorted = sorted({as_fraction(e) for e in eps_grid})
    P = polarization(X, L)
    zeta_L = min(P.beta(v) / P.S(v) for v in _candidates(X.dim, budget))
    rows = []
    for eps in eps_sorted:
        if eps == 0:
            rows.append(ModulusRow(eps, Fraction(0), Fraction(0), Fraction(0), zeta_L,
                                   len(_candidates(X.dim, budget))))
            continue
        L2 = L + H * eps
        if not is_ample(X, L2):
            rows.append(ModulusRow(eps, None, None, None, note="not ample; skipped"))
            continue
        rows.append(_modulus_row(X, L, L2, eps, budget, c))
    table = ModulusTable(direction, rows, zeta_L)
    live = [r for r in rows if r.f_filtered is not None]
    table.monotone = all(a.f_filtered <= b.f_filtered and a.h <= b.h
                         for a, b in zip(live, live[1:]))
    positive = [r for r in live if r.eps > 0]
    # smallest eps against the largest one; judged only on grids spanning
    # a factor of DECAY_SPAN, otherwise reported as None
    if len(positive) >= 2 and positive[-1].eps >= DECAY_SPAN * positive[0].eps:
        table.decay = positive[0].f_filtered * 4 <= positive[-1].f_filtered
    else:
        table.decay = None
    ok = True
    for r in positive:
        minus, plus, _ = s_bounds(r.eps, X.dim, digits)
        # the endpoint giving the larger (harder) lower bound
        factor = minus.hi if zeta_L >= 0 else plus.lo
        lower = zeta_L * factor - r.f_all
        holds = r.zeta_L2 >= lower
        ok = ok and holds
        table.transfer.append({"eps": fmt_rational(r.eps), "zeta_L2": fmt_rational(r.zeta_L2),
                               "lower_bound": fmt_decimal(lower, digits, ROUND_CEILING),
                               "holds": holds})
    table.transfer_ok = ok
    return table
