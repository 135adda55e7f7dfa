"""Valuative invariants of a polarised toric variety at a monomial valuation.

Everything is exact.  Two independent routes are kept for the integral
``int_0^tau Vol'(L - xF) . G dx`` that enters beta:

* the *swap* route differentiates ``S_{L+tG}(F)`` in ``t``; for ample ``L``
  both the volume and the first moment of ``P_{L+tG}`` are polynomials in
  ``t`` near 0, recovered by exact interpolation;
* the *slab* route integrates the facet formula
  ``d/dt Vol = n! * sum_i (d offset_i/dt) * facet_measure_i`` piecewise in
  ``x``, with exact interpolatory quadrature on every piece of the profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from math import factorial
from typing import Sequence

from .ratgeom import (
    HPolytope,
    dot,
    dual_description,
    euclidean_volume,
    face_measure,
    integrate_affine,
    moments,
    solve,
)
from .toric import (
    DivisorClass,
    ToricVariety,
    _as_vector,
    anticanonical,
    canonical_class,
    degree_by_facets,
    enumerate_valuations,
    intersection_number,
    is_ample,
    log_discrepancy,
    pl_value,
    section_polytope,
    volume,
    wall_values,
)


class InvariantError(ValueError):
    pass


class ConsistencyError(AssertionError):
    """Two routes that must agree exactly did not."""


class KinkError(ArithmeticError):
    """One-sided derivatives of the volume disagree."""


@dataclass(frozen=True)
class Approx:
    """Approximate value with an absolute error bound."""

    value: Fraction
    error: Fraction


# ---------------------------------------------------------------------------
# univariate polynomials, coefficients in ascending order
# ---------------------------------------------------------------------------

def interpolate(xs: Sequence[Fraction], ys: Sequence[Fraction]) -> tuple[Fraction, ...]:
    k = len(xs)
    coeffs = solve([[Fraction(x) ** j for j in range(k)] for x in xs], list(ys))
    if coeffs is None:
        raise ValueError("interpolation nodes are not distinct")
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def poly_eval(coeffs: Sequence[Fraction], x) -> Fraction:
    out = Fraction(0)
    for c in reversed(coeffs):
        out = out * x + c
    return out


def poly_deriv(coeffs: Sequence[Fraction]) -> tuple[Fraction, ...]:
    return tuple(k * c for k, c in enumerate(coeffs))[1:] or (Fraction(0),)


def poly_integral(coeffs: Sequence[Fraction], a, b) -> Fraction:
    out = Fraction(0)
    for k, c in enumerate(coeffs):
        out += c * (Fraction(b) ** (k + 1) - Fraction(a) ** (k + 1)) / (k + 1)
    return out


@lru_cache(maxsize=64)
def _quadrature_weights(k: int) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    """Open interpolatory rule on [0, 1] with k nodes, exact for degree k-1."""
    nodes = tuple(Fraction(j + 1, k + 1) for j in range(k))
    rhs = [Fraction(1, p + 1) for p in range(k)]
    weights = solve([[x ** p for x in nodes] for p in range(k)], rhs)
    return nodes, tuple(weights)


# ---------------------------------------------------------------------------
# volume profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VolumeProfile:
    """``x -> Vol(L - xF)`` on ``[0, tau]`` as a piecewise polynomial."""

    dim: int
    breakpoints: tuple[Fraction, ...]
    pieces: tuple[tuple[Fraction, ...], ...]
    m0: Fraction
    offset: Fraction = field(default=None)

    @property
    def tau(self) -> Fraction:
        return self.breakpoints[-1]

    def _piece(self, x) -> int:
        bp = self.breakpoints
        for k in range(len(self.pieces)):
            if x <= bp[k + 1]:
                return k
        return len(self.pieces) - 1

    def __call__(self, x) -> Fraction:
        x = Fraction(x)
        if x < 0:
            raise ValueError("profile is defined for x >= 0")
        if x >= self.tau:
            return Fraction(0)
        return poly_eval(self.pieces[self._piece(x)], x)

    def derivative(self, x) -> Fraction:
        x = Fraction(x)
        if x >= self.tau:
            return Fraction(0)
        return poly_eval(poly_deriv(self.pieces[self._piece(x)]), x)

    def integral(self) -> Fraction:
        bp = self.breakpoints
        return sum((poly_integral(c, bp[k], bp[k + 1]) for k, c in enumerate(self.pieces)),
                   Fraction(0))


def _slab_polytope(X: ToricVariety, L: DivisorClass, v: tuple[int, ...], level: Fraction) -> HPolytope:
    return section_polytope(X, L).intersect(v, -level)


@lru_cache(maxsize=65536)
def _slab_volume(X: ToricVariety, L: DivisorClass, v: tuple[int, ...], level: Fraction) -> Fraction:
    vp = dual_description(_slab_polytope(X, L, v, level))
    return factorial(X.dim) * euclidean_volume(vp)


def volume_profile(X: ToricVariety, L: DivisorClass, F) -> VolumeProfile:
    """Exact ``Vol(pi^*L - xF)``; breakpoints where the slicing hyperplane
    passes a vertex of ``P_L``."""
    v = _as_vector(F)
    return _volume_profile(X, L, v)


@lru_cache(maxsize=16384)
def _volume_profile(X: ToricVariety, L: DivisorClass, v: tuple[int, ...]) -> VolumeProfile:
    if volume(X, L) <= 0:
        raise InvariantError("profile undefined: divisor is not big")
    n = X.dim
    vp = dual_description(section_polytope(X, L))
    psi = pl_value(X, L, v)
    levels = sorted({dot(w, v) - psi for w in vp.vertices})
    m0 = levels[0] + psi
    bps = sorted({Fraction(0)} | {x for x in levels if x > 0})
    pieces = []
    for a, b in zip(bps, bps[1:]):
        xs = [a + (b - a) * Fraction(j, n) for j in range(n + 1)]
        ys = [_slab_volume(X, L, v, psi + x) for x in xs]
        pieces.append(interpolate(xs, ys))
    for k in range(len(pieces) - 1):
        x = bps[k + 1]
        if poly_eval(pieces[k], x) != poly_eval(pieces[k + 1], x):
            raise ConsistencyError("profile discontinuous at a breakpoint")
    return VolumeProfile(n, tuple(bps), tuple(pieces), m0, psi)


def tau(X: ToricVariety, L: DivisorClass, F) -> Fraction:
    """Pseudo-effective threshold ``max_P <u,v> - psi_L(v)``."""
    v = _as_vector(F)
    vp = dual_description(section_polytope(X, L))
    if vp.is_empty:
        raise InvariantError("divisor is not effective")
    return max(dot(w, v) for w in vp.vertices) - pl_value(X, L, v)


def s_invariant(X: ToricVariety, L: DivisorClass, F) -> Fraction:
    """``S_L(F) = int_0^oo Vol(L - xF) dx`` by profile quadrature, checked
    against the layer-cake integral ``n! int_P (<u,v> - psi_L(v)) du``."""
    v = _as_vector(F)
    by_profile = volume_profile(X, L, v).integral()
    vp = dual_description(section_polytope(X, L))
    by_layers = factorial(X.dim) * integrate_affine(vp, v, -pl_value(X, L, v))
    if by_profile != by_layers:
        raise ConsistencyError(f"S routes disagree: {by_profile} != {by_layers}")
    return by_profile


def j_invariant(X: ToricVariety, L: DivisorClass, F) -> Fraction:
    return volume(X, L) * tau(X, L, F) - s_invariant(X, L, F)


# ---------------------------------------------------------------------------
# slope and nef thresholds
# ---------------------------------------------------------------------------

def _require_ample(X: ToricVariety, L: DivisorClass):
    if not is_ample(X, L):
        raise InvariantError("divisor is not ample")


def slope_mu(X: ToricVariety, L: DivisorClass) -> Fraction:
    """``-K . L^(n-1) / L^n`` by interpolation, cross-checked by facets."""
    _require_ample(X, L)
    n = X.dim
    top = intersection_number(X, *([L] * n))
    if top == 0:
        raise InvariantError("undefined slope: L^n = 0")
    mixed = intersection_number(X, anticanonical(X), *([L] * (n - 1)))
    if mixed != degree_by_facets(X, anticanonical(X), L):
        raise ConsistencyError("-K.L^(n-1): interpolation and facet routes disagree")
    return mixed / top


def nef_thresholds(X: ToricVariety, L: DivisorClass) -> tuple[Fraction, Fraction]:
    """``(s(L), s~(L))``: every wall value is affine in s, so the thresholds
    are the min and max of ``w(-K) / w(L)`` over the walls."""
    _require_ample(X, L)
    wl = wall_values(X, L)
    wk = wall_values(X, anticanonical(X))
    ratios = [a / b for a, b in zip(wk, wl)]
    return min(ratios), max(ratios)


# ---------------------------------------------------------------------------
# derivatives of the volume
# ---------------------------------------------------------------------------

def _family(X: ToricVariety, D: DivisorClass, G: DivisorClass, v, x):
    """Normals, base offsets and offset velocities of ``pi^*(D+tG) - xF``."""
    normals = list(X.rays)
    base = list(D.coeffs)
    vel = list(G.coeffs)
    if v is not None:
        normals.append(tuple(v))
        base.append(-(pl_value(X, D, v) + Fraction(x)))
        vel.append(-pl_value(X, G, v))
    return normals, base, vel


def _family_volume(n, normals, base, vel, t) -> Fraction:
    hp = HPolytope(n, tuple(normals), tuple(b + t * g for b, g in zip(base, vel)))
    return factorial(n) * euclidean_volume(dual_description(hp))


def _facet_derivative(n, normals, base, vel) -> Fraction:
    hp = HPolytope(n, tuple(normals), tuple(base))
    vp = dual_description(hp)
    total = Fraction(0)
    for nv, h, g in zip(normals, base, vel):
        if g != 0:
            total += g * face_measure(vp, nv, h)
    return factorial(n) * total


def vol_derivative(X: ToricVariety, D: DivisorClass, G: DivisorClass, F=None, x=0,
                   method: str = "interp"):
    """``d/dt Vol(pi^*D - xF + t pi^*G)`` at ``t = 0``.

    ``method="interp"`` interpolates the piecewise polynomial on each side of
    0, checks both one-sided derivatives against the facet formula, and
    returns the exact value.  ``"facet"`` uses the facet formula alone.
    ``"fd"`` returns an :class:`Approx` from Richardson-extrapolated
    symmetric quotients.
    """
    n = X.dim
    v = _as_vector(F) if F is not None else None
    normals, base, vel = _family(X, D, G, v, x)
    if _family_volume(n, normals, base, vel, 0) <= 0:
        raise InvariantError("divisor is not big")
    if method == "facet":
        return _facet_derivative(n, normals, base, vel)
    if method == "fd":
        return _fd_derivative(n, normals, base, vel)
    if method != "interp":
        raise ValueError(f"unknown method {method!r}")

    facet = _facet_derivative(n, normals, base, vel)
    sides = []
    for sign in (1, -1):
        h = Fraction(1, 4)
        for _ in range(40):
            ts = [sign * h * j for j in range(n + 1)]
            ys = [_family_volume(n, normals, base, vel, t) for t in ts]
            poly = interpolate(ts, ys)
            check_t = sign * h * (n + 1)
            if poly_eval(poly, check_t) == _family_volume(n, normals, base, vel, check_t):
                break
            h /= 2
        else:
            raise KinkError("no polynomial chamber found next to t = 0")
        sides.append(poly[1] if len(poly) > 1 else Fraction(0))
    if not sides[0] == sides[1] == facet:
        raise KinkError(f"kink detected: right {sides[0]}, left {sides[1]}, facet {facet}")
    return facet


def _fd_derivative(n, normals, base, vel) -> Approx:
    def quotient(h):
        return (_family_volume(n, normals, base, vel, h)
                - _family_volume(n, normals, base, vel, -h)) / (2 * h)

    h = Fraction(1, 64)
    d1, d2, d3 = quotient(h), quotient(h / 2), quotient(h / 4)
    r1 = (4 * d2 - d1) / 3
    r2 = (4 * d3 - d2) / 3
    return Approx(r2, abs(r2 - r1) * 10)


# ---------------------------------------------------------------------------
# per-polarisation data
# ---------------------------------------------------------------------------

class Polarization:
    """Cached data of an ample ``L`` shared by every valuation.

    ``S_L(v) = <M, v> - Vol * psi_L(v)`` with ``M = n! * int_P u du``.
    """

    def __init__(self, X: ToricVariety, L: DivisorClass):
        self.X = X
        self.L = L
        self.n = X.dim
        self.polytope = dual_description(section_polytope(X, L))
        vol, mom = moments(self.polytope)
        f = factorial(self.n)
        self.vol = f * vol
        self.moment = tuple(f * m for m in mom)

    @cached_property
    def ample(self) -> bool:
        return is_ample(self.X, self.L)

    @cached_property
    def mu(self) -> Fraction:
        return slope_mu(self.X, self.L)

    @cached_property
    def thresholds(self) -> tuple[Fraction, Fraction]:
        return nef_thresholds(self.X, self.L)

    def psi(self, v) -> Fraction:
        return pl_value(self.X, self.L, v)

    def A(self, v) -> Fraction:
        return log_discrepancy(self.X, v)

    def S(self, v) -> Fraction:
        v = _as_vector(v)
        return dot(self.moment, v) - self.vol * self.psi(v)

    def tau(self, v) -> Fraction:
        v = _as_vector(v)
        return max(dot(w, v) for w in self.polytope.vertices) - self.psi(v)

    def j(self, v) -> Fraction:
        return self.vol * self.tau(v) - self.S(v)

    def derivative_data(self, G: DivisorClass) -> tuple[Fraction, tuple[Fraction, ...]]:
        """``(d/dt Vol(L+tG), d/dt M(L+tG))`` at 0, exact."""
        return _derivative_data(self.X, self.L, G)

    def swap_integral(self, v, G: DivisorClass) -> Fraction:
        """``int_0^tau Vol'(L - xF) . G dx`` as ``d/dt S_{L+tG}(F)``."""
        v = _as_vector(v)
        dvol, dmom = self.derivative_data(G)
        return dot(dmom, v) - dvol * self.psi(v) - self.vol * pl_value(self.X, G, v)

    def beta(self, v) -> Fraction:
        v = _as_vector(v)
        K = canonical_class(self.X)
        return (self.A(v) * self.vol + self.n * self.mu * self.S(v)
                + self.swap_integral(v, K))


@lru_cache(maxsize=4096)
def polarization(X: ToricVariety, L: DivisorClass) -> Polarization:
    return Polarization(X, L)


@lru_cache(maxsize=16384)
def _derivative_data(X: ToricVariety, L: DivisorClass, G: DivisorClass):
    _require_ample(X, L)
    n = X.dim
    h = Fraction(1, 8)
    while not is_ample(X, L + G * (h * (n + 2))):
        h /= 2
        if h < Fraction(1, 2**60):
            raise InvariantError("no ample neighbourhood along the direction")
    ts = [h * j for j in range(n + 2)]
    vols, moms = [], []
    for t in ts + [h * (n + 2)]:
        vol, mom = moments(dual_description(section_polytope(X, L + G * t)))
        vols.append(factorial(n) * vol)
        moms.append(tuple(factorial(n) * m for m in mom))
    pv = interpolate(ts, vols[:-1])
    if poly_eval(pv, ts[-1] + h) != vols[-1]:
        raise ConsistencyError("volume is not polynomial on the ample segment")
    dvol = pv[1] if len(pv) > 1 else Fraction(0)
    dmom = []
    for i in range(n):
        pm = interpolate(ts, [m[i] for m in moms[:-1]])
        if poly_eval(pm, ts[-1] + h) != moms[-1][i]:
            raise ConsistencyError("moment is not polynomial on the ample segment")
        dmom.append(pm[1] if len(pm) > 1 else Fraction(0))
    return dvol, tuple(dmom)


# ---------------------------------------------------------------------------
# slab route
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16384)
def slab_facet_integrals(X: ToricVariety, L: DivisorClass, F) -> tuple[tuple[Fraction, ...], Fraction]:
    """``(J_rho, J_slab)`` with ``J = n! int_0^tau facet_measure(Q(x)) dx``.

    ``Q(x)`` is the section polytope of ``pi^*L - xF``; then
    ``int_0^tau Vol'(L-xF).G dx = sum g_rho J_rho - psi_G(v) J_slab``.
    """
    v = _as_vector(F)
    n = X.dim
    prof = volume_profile(X, L, v)
    psi = prof.offset
    nodes, weights = _quadrature_weights(n)
    J = [Fraction(0)] * X.nrays
    Js = Fraction(0)
    bp = prof.breakpoints
    for a, b in zip(bp, bp[1:]):
        width = b - a
        for xi, w in zip(nodes, weights):
            x = a + width * xi
            vp = dual_description(_slab_polytope(X, L, v, psi + x))
            for i, (nv, h) in enumerate(zip(X.rays, L.coeffs)):
                J[i] += w * width * face_measure(vp, nv, h)
            Js += w * width * face_measure(vp, v, -(psi + x))
    f = factorial(n)
    return tuple(f * j for j in J), f * Js


def slab_integral(X: ToricVariety, L: DivisorClass, F, G: DivisorClass) -> Fraction:
    """``int_0^tau n <(L-xF)^(n-1)> . G dx`` by the slab route."""
    v = _as_vector(F)
    J, Js = slab_facet_integrals(X, L, v)
    return dot(G.coeffs, J) - pl_value(X, G, v) * Js


def derivative_integral(X: ToricVariety, L: DivisorClass, F, G: DivisorClass,
                        route: str = "swap") -> Fraction:
    if route == "swap":
        return polarization(X, L).swap_integral(_as_vector(F), G)
    if route == "slab":
        return slab_integral(X, L, F, G)
    raise ValueError(f"unknown route {route!r}")


# ---------------------------------------------------------------------------
# beta
# ---------------------------------------------------------------------------

def beta_direct(X: ToricVariety, L: DivisorClass, F) -> Fraction:
    """``A Vol(L) + n mu S + int Vol'(L - xF) . K_X dx``."""
    _require_ample(X, L)
    return polarization(X, L).beta(_as_vector(F))


def beta_rewritten(X: ToricVariety, L: DivisorClass, F, mode: str = "s") -> Fraction:
    """The two rewrites of beta through the nef thresholds, slab route."""
    _require_ample(X, L)
    v = _as_vector(F)
    P = polarization(X, L)
    n = X.dim
    K = canonical_class(X)
    s, st = P.thresholds
    base = P.A(v) * P.vol
    if mode == "s":
        G = -(L * s) - K
        return base + (n * P.mu - (n + 1) * s) * P.S(v) - slab_integral(X, L, v, G)
    if mode in ("stilde", "s~"):
        G = L * st + K
        return base + (n * P.mu - (n + 1) * st) * P.S(v) + slab_integral(X, L, v, G)
    raise ValueError(f"unknown mode {mode!r}")


def beta_fano_identity_check(X: ToricVariety, F) -> bool:
    """At ``L = -K_X`` beta reduces to ``A Vol - S``."""
    L = anticanonical(X)
    if not is_ample(X, L):
        raise InvariantError("variety is not Fano")
    P = polarization(X, L)
    v = _as_vector(F)
    return beta_direct(X, L, v) == P.A(v) * P.vol - P.S(v)


# ---------------------------------------------------------------------------
# thresholds over budgeted valuations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdResult:
    value: Fraction
    minimizer: tuple[int, ...] | None
    minimizers: tuple[tuple[int, ...], ...] = ()
    candidates: int = 0
    note: str = ""


@lru_cache(maxsize=32)
def _candidates(n: int, budget: int) -> tuple[tuple[int, ...], ...]:
    return tuple(w.v for w in enumerate_valuations(n, budget))


def _minimize(values: dict[tuple[int, ...], Fraction], note="") -> ThresholdResult:
    best = min(values.values())
    ties = tuple(v for v, q in values.items() if q == best)
    return ThresholdResult(best, ties[0], ties, len(values), note)


def delta_toric(X: ToricVariety, L: DivisorClass, budget: int) -> ThresholdResult:
    """``min A Vol / S`` over primitive v with sup-norm <= budget."""
    _require_ample(X, L)
    P = polarization(X, L)
    vals = {v: P.A(v) * P.vol / P.S(v) for v in _candidates(X.dim, budget)}
    return _minimize(vals, "toric valuations only")


def zeta_toric(X: ToricVariety, L: DivisorClass, budget: int) -> ThresholdResult:
    """``min beta / S`` over primitive v with sup-norm <= budget."""
    _require_ample(X, L)
    P = polarization(X, L)
    vals = {v: P.beta(v) / P.S(v) for v in _candidates(X.dim, budget)}
    return _minimize(vals, "zeta_toric: infimum over monomial valuations in the budget")


@dataclass(frozen=True)
class UdResult:
    value: Fraction
    zeta: Fraction
    bound: Fraction
    filtered: int
    total: int
    agrees: bool
    note: str = ""


def zeta_ud(X: ToricVariety, L: DivisorClass, budget: int, c=1) -> UdResult:
    """Threshold over the valuations with ``beta <= C_L S`` only, where
    ``C_L = delta + n mu - (n+1) s~ + c``; compared with :func:`zeta_toric`."""
    c = Fraction(c)
    if c <= 0:
        raise ValueError("c must be positive")
    P = polarization(X, L)
    n = X.dim
    delta = delta_toric(X, L, budget).value
    bound = delta + n * P.mu - (n + 1) * P.thresholds[1] + c
    ratios = {v: P.beta(v) / P.S(v) for v in _candidates(n, budget)}
    zeta = min(ratios.values())
    kept = [q for v, q in ratios.items() if q <= bound]
    if not kept:
        return UdResult(bound, zeta, bound, 0, len(ratios), False,
                        "filtered set empty; returning C_L")
    value = min(kept)
    return UdResult(value, zeta, bound, len(kept), len(ratios), value == zeta)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

REPORT_FIELDS = ("A", "vol", "tau", "S", "j", "mu", "s", "stilde",
                 "beta_direct", "beta_s_form", "beta_stilde_form", "beta_over_S")


@dataclass
class InvariantReport:
    valuation: tuple[int, ...]
    ample: bool
    values: dict[str, Fraction | None]
    exact: dict[str, bool]
    profile: VolumeProfile | None = None

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)


def invariant_report(X: ToricVariety, L: DivisorClass, F) -> InvariantReport:
    """Every invariant at ``(L, F)``; big-only classes get the profile part."""
    v = _as_vector(F)
    ample = is_ample(X, L)
    vals: dict[str, Fraction | None] = dict.fromkeys(REPORT_FIELDS)
    prof = volume_profile(X, L, v)
    vals["A"] = log_discrepancy(X, v)
    vals["vol"] = volume(X, L)
    vals["tau"] = prof.tau
    vals["S"] = s_invariant(X, L, v)
    vals["j"] = vals["vol"] * vals["tau"] - vals["S"]
    if ample:
        P = polarization(X, L)
        vals["mu"] = P.mu
        vals["s"], vals["stilde"] = P.thresholds
        vals["beta_direct"] = beta_direct(X, L, v)
        vals["beta_s_form"] = beta_rewritten(X, L, v, "s")
        vals["beta_stilde_form"] = beta_rewritten(X, L, v, "stilde")
        vals["beta_over_S"] = vals["beta_direct"] / vals["S"]
    exact = {k: True for k, x in vals.items() if x is not None}
    return InvariantReport(v, ample, vals, exact, prof)
