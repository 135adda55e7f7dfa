"""Randomised identity and inequality suites over a toric variety.

Each suite draws ample classes and valuations from ``random.Random(seed)``
and returns a :class:`SuiteResult` holding its verdict, the largest residual
seen and a few counterexamples.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .invariants import (
    _candidates,
    beta_direct,
    beta_fano_identity_check,
    beta_rewritten,
    delta_toric,
    polarization,
    s_invariant,
    slab_integral,
    vol_derivative,
    volume_profile,
    zeta_toric,
)
from .perturb import check_s_estimate, nef_basis, standard_directions
from .ratgeom import fmt_rational
from .toric import (
    DivisorClass,
    ToricVariety,
    anticanonical,
    canonical_class,
    is_ample,
    nef_cone_generators,
    volume,
)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    samples: int
    max_residual: Fraction = Fraction(0)
    exact: bool = True
    counterexamples: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "samples": self.samples,
                "max_residual": fmt_rational(self.max_residual), "exact": self.exact,
                "counterexamples": self.counterexamples, "notes": self.notes}


def _cls(D: DivisorClass) -> list[str]:
    return [fmt_rational(c) for c in D.coeffs]


def random_rational(rng: random.Random, lo: int, hi: int, den: int = 4) -> Fraction:
    return Fraction(rng.randint(lo * den, hi * den), den)


def random_ample(X: ToricVariety, rng: random.Random) -> DivisorClass:
    """Positive combination of nef cone generators, moved by a random
    principal divisor (which changes the polytope by a translation)."""
    gens = nef_cone_generators(X)
    while True:
        L = X.zero()
        for g in gens:
            L = L + g * Fraction(rng.randint(1, 12), rng.randint(1, 4))
        L = L + X.principal([rng.randint(-2, 2) for _ in range(X.dim)])
        if is_ample(X, L):
            return L


def random_valuation(X: ToricVariety, rng: random.Random, budget: int = 3) -> tuple[int, ...]:
    return rng.choice(_candidates(X.dim, budget))


def _record(res: SuiteResult, residual: Fraction, bad: bool, detail: dict, limit: int = 5):
    res.max_residual = max(res.max_residual, abs(residual))
    if bad:
        res.passed = False
        if len(res.counterexamples) < limit:
            res.counterexamples.append(detail)


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def suite_norm_relations(X: ToricVariety, rng: random.Random, samples: int) -> SuiteResult:
    """``Vol tau/(n+1) <= S, j <= n Vol tau/(n+1)`` and the concavity lower
    bound ``Vol(L - xF) >= Vol(L) (1 - x/tau)^n``."""
    res = SuiteResult("norm-relations", True, samples)
    n = X.dim
    displayed_fails = 0
    for _ in range(samples):
        L, v = random_ample(X, rng), random_valuation(X, rng)
        P = polarization(X, L)
        vol, t, S = P.vol, P.tau(v), s_invariant(X, L, v)
        j = vol * t - S
        lo, hi = vol * t / (n + 1), n * vol * t / (n + 1)
        margin = min(S - lo, hi - S, j - lo, hi - j)
        prof = volume_profile(X, L, v)
        for k in range(1, 8):
            x = t * Fraction(k, 8)
            val = prof(x)
            margin = min(margin, val - vol * (1 - x / t) ** n)
            if val < vol * (x / t) ** n:
                displayed_fails += 1
        _record(res, min(margin, Fraction(0)), margin < 0,
                {"L": _cls(L), "v": list(v), "S": fmt_rational(S), "j": fmt_rational(j)})
    res.notes.append(f"profile points below Vol(L)(x/tau)^n: {displayed_fails}")
    return res


def suite_integration_by_parts(X: ToricVariety, rng: random.Random, samples: int) -> SuiteResult:
    """``int_0^tau n <(L-xF)^(n-1)> . L dx = (n+1) S`` by the slab route,
    and the slab and swap routes agree against ``K``."""
    res = SuiteResult("integration-by-parts", True, samples)
    n = X.dim
    K = canonical_class(X)
    for _ in range(samples):
        L, v = random_ample(X, rng), random_valuation(X, rng)
        r1 = slab_integral(X, L, v, L) - (n + 1) * s_invariant(X, L, v)
        r2 = slab_integral(X, L, v, K) - polarization(X, L).swap_integral(v, K)
        _record(res, max(abs(r1), abs(r2)), r1 != 0 or r2 != 0,
                {"L": _cls(L), "v": list(v), "residual": fmt_rational(r1),
                 "route_gap": fmt_rational(r2)})
    return res


def suite_beta_forms(X: ToricVariety, rng: random.Random, samples: int) -> SuiteResult:
    res = SuiteResult("beta-forms", True, samples)
    for _ in range(samples):
        L, v = random_ample(X, rng), random_valuation(X, rng)
        b = beta_direct(X, L, v)
        bs = beta_rewritten(X, L, v, "s")
        bt = beta_rewritten(X, L, v, "stilde")
        r = max(abs(b - bs), abs(b - bt))
        _record(res, r, r != 0, {"L": _cls(L), "v": list(v), "direct": fmt_rational(b),
                                 "s_form": fmt_rational(bs), "stilde_form": fmt_rational(bt)})
    return res


def suite_fano(X: ToricVariety, rng: random.Random, samples: int, budget: int = 3) -> SuiteResult:
    """``beta = A Vol - S`` at ``L = -K`` on every budgeted valuation."""
    vs = _candidates(X.dim, budget)
    res = SuiteResult("fano", True, len(vs))
    if not is_ample(X, anticanonical(X)):
        res.notes.append("not Fano; skipped")
        res.samples = 0
        return res
    for v in vs:
        ok = beta_fano_identity_check(X, v)
        _record(res, Fraction(0), not ok, {"v": list(v)})
    return res


def suite_homogeneity(X: ToricVariety, rng: random.Random, samples: int) -> SuiteResult:
    res = SuiteResult("homogeneity", True, samples)
    n = X.dim
    for _ in range(samples):
        L, v = random_ample(X, rng), random_valuation(X, rng)
        k = Fraction(rng.randint(1, 20), rng.randint(1, 7))
        P, Pk = polarization(X, L), polarization(X, L * k)
        r1 = Pk.beta(v) - k ** n * P.beta(v)
        r2 = Pk.S(v) - k ** (n + 1) * P.S(v)
        r3 = volume(X, L * k) - k ** n * P.vol
        r = max(abs(r1), abs(r2), abs(r3))
        _record(res, r, r != 0, {"L": _cls(L), "v": list(v), "k": fmt_rational(k)})
    return res


def suite_slope_sandwich(X: ToricVariety, rng: random.Random, samples: int) -> SuiteResult:
    res = SuiteResult("slope-sandwich", True, samples)
    for _ in range(samples):
        L = random_ample(X, rng)
        P = polarization(X, L)
        s, st = P.thresholds
        margin = min(P.mu - s, st - P.mu)
        _record(res, min(margin, Fraction(0)), margin < 0,
                {"L": _cls(L), "s": fmt_rational(s), "mu": fmt_rational(P.mu),
                 "stilde": fmt_rational(st)})
    return res


def _iroot(N: int, n: int) -> int:
    """Floor of the n-th root of a nonnegative integer."""
    if N < 2:
        return N
    x = 1 << ((N.bit_length() + n - 1) // n)
    while True:
        y = ((n - 1) * x + N // x ** (n - 1)) // n
        if y >= x:
            break
        x = y
    while x ** n > N:
        x -= 1
    while (x + 1) ** n <= N:
        x += 1
    return x


def root_interval(x: Fraction, n: int, digits: int = 40) -> tuple[Fraction, Fraction]:
    scale = 10 ** digits
    r = _iroot(x.numerator * scale ** n // x.denominator, n)
    return Fraction(r, scale), Fraction(r + 1, scale)


def suite_concavity(X: ToricVariety, rng: random.Random, samples: int,
                    digits: int = 40) -> SuiteResult:
    """Midpoint concavity of ``Vol(L - xF)^(1/n)``, with n-th roots enclosed
    in intervals of width ``10^-digits``; ties within the enclosure count as
    equality."""
    res = SuiteResult("concavity", True, samples, exact=False)
    n = X.dim
    tol = Fraction(4, 10 ** digits)
    for _ in range(samples):
        L, v = random_ample(X, rng), random_valuation(X, rng)
        prof = volume_profile(X, L, v)
        t = prof.tau
        x, y = sorted(t * Fraction(rng.randint(0, 64), 64) for _ in range(2))
        m = (x + y) / 2
        a = root_interval(prof(x), n, digits)
        b = root_interval(prof(y), n, digits)
        c = root_interval(prof(m), n, digits)
        # lower end of 2c - a - b
        gap = 2 * c[0] - a[1] - b[1]
        _record(res, min(gap, Fraction(0)), gap < -tol,
                {"L": _cls(L), "v": list(v), "x": fmt_rational(x), "y": fmt_rational(y)})
    res.notes.append(f"root enclosure width 10^-{digits}")
    return res


def suite_self_derivative(X: ToricVariety, rng: random.Random, samples: int) -> SuiteResult:
    """``d/dt Vol(D + tD) = n Vol(D)``, and the interpolated derivative
    along a random direction matches the facet formula."""
    res = SuiteResult("self-derivative", True, samples)
    n = X.dim
    for _ in range(samples):
        L = random_ample(X, rng)
        G = random_ample(X, rng) - random_ample(X, rng)
        r1 = vol_derivative(X, L, L) - n * volume(X, L)
        r2 = vol_derivative(X, L, G, method="interp") - vol_derivative(X, L, G, method="facet")
        r = max(abs(r1), abs(r2))
        _record(res, r, r != 0, {"L": _cls(L), "G": _cls(G)})
    return res


def suite_delta_relation(X: ToricVariety, rng: random.Random, samples: int,
                         budget: int = 2) -> SuiteResult:
    """``zeta >= delta + n mu - (n+1) s~`` on the same budget."""
    res = SuiteResult("delta-relation", True, samples)
    n = X.dim
    for _ in range(samples):
        L = random_ample(X, rng)
        P = polarization(X, L)
        z = zeta_toric(X, L, budget).value
        d = delta_toric(X, L, budget).value
        margin = z - (d + n * P.mu - (n + 1) * P.thresholds[1])
        _record(res, min(margin, Fraction(0)), margin < 0,
                {"L": _cls(L), "zeta": fmt_rational(z), "delta": fmt_rational(d)})
    return res


def suite_budget_monotonicity(X: ToricVariety, rng: random.Random, samples: int) -> SuiteResult:
    res = SuiteResult("budget-monotonicity", True, samples)
    for _ in range(samples):
        L = random_ample(X, rng)
        zs = [zeta_toric(X, L, b).value for b in (1, 2, 3)]
        margin = min(zs[0] - zs[1], zs[1] - zs[2])
        _record(res, min(margin, Fraction(0)), margin < 0,
                {"L": _cls(L), "zeta": [fmt_rational(z) for z in zs]})
    return res


def suite_s_estimate(X: ToricVariety, rng: random.Random, samples: int,
                     ks=range(4, 11), budget: int = 3) -> SuiteResult:
    """S-comparison bounds with outward-rounded ``s^-, s^+``, at ``L = -K``
    (or a random ample class) along the standard directions."""
    L = anticanonical(X) if is_ample(X, anticanonical(X)) else random_ample(X, rng)
    basis = nef_basis(X, L)
    dirs = standard_directions(basis)
    res = SuiteResult("s-estimate", True, 0)
    for name, H in dirs:
        for k in ks:
            eps = Fraction(1, 2 ** k)
            r = check_s_estimate(X, L, None, None, eps, H=H, direction=name, budget=budget,
                                 enforce_precondition=False)
            if not r.precondition:
                res.notes.append(f"{name} eps=2^-{k}: outside the bigness precondition, "
                                 "bounds evaluated anyway")
            res.samples += len(r.records)
            _record(res, Fraction(0), not r.passed,
                    {"direction": name, "eps": fmt_rational(eps),
                     "failures": [list(v) for v in r.failures[:5]]})
    return res


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "norm-relations": suite_norm_relations,
    "integration-by-parts": suite_integration_by_parts,
    "beta-forms": suite_beta_forms,
    "fano": suite_fano,
    "homogeneity": suite_homogeneity,
    "slope-sandwich": suite_slope_sandwich,
    "concavity": suite_concavity,
    "self-derivative": suite_self_derivative,
    "delta-relation": suite_delta_relation,
    "budget-monotonicity": suite_budget_monotonicity,
    "s-estimate": suite_s_estimate,
}

DEFAULT_SAMPLES = {
    "delta-relation": 10,
    "budget-monotonicity": 10,
    "self-derivative": 20,
}


def run_suites(X: ToricVariety, names=None, seed: int = 0, samples: int = 100) -> list[SuiteResult]:
    """Run the named suites (all by default), each with its own seeded stream."""
    names = list(SUITES) if names in (None, "all", ["all"]) else list(names)
    out = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; known: {sorted(SUITES)}")
        rng = random.Random(f"{seed}:{name}")
        k = min(samples, DEFAULT_SAMPLES.get(name, samples))
        out.append(SUITES[name](X, rng, k))
    return out
