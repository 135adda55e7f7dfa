from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SURFACES, pairs
from oracles import ehrhart_s
from valstab.invariants import (
    Approx,
    InvariantError,
    beta_direct,
    beta_fano_identity_check,
    beta_rewritten,
    delta_toric,
    derivative_integral,
    interpolate,
    invariant_report,
    j_invariant,
    nef_thresholds,
    polarization,
    s_invariant,
    slope_mu,
    tau,
    vol_derivative,
    volume_profile,
    zeta_toric,
    zeta_ud,
)
from valstab.toric import (
    anticanonical,
    canonical_class,
    log_discrepancy,
    parse_divisor,
    section_polytope,
    standard_variety,
    volume,
)


@pytest.fixture(scope="module")
def L_P2(P2):
    return P2.classes["H"] * 3


@pytest.fixture(scope="module")
def L_Q(Q):
    return parse_divisor(Q, "H1+2H2")


@pytest.fixture(scope="module")
def K_F1(F1):
    return anticanonical(F1)


# ---------------------------------------------------------------------------
# hand-derived values
# ---------------------------------------------------------------------------

def test_profiles(P2, L_P2, F1, K_F1):
    p = volume_profile(P2, L_P2, (1, 0))
    assert p.breakpoints == (0, 3) and p.pieces == ((9, -6, 1),)
    p = volume_profile(P2, L_P2, (1, 1))
    assert p.pieces == ((9, 0, -1),)
    p = volume_profile(F1, K_F1, (0, 1))
    assert p.tau == 2
    assert all(p(x) == 9 - (x + 1) ** 2 for x in (0, Fraction(1, 3), 1, Fraction(7, 4)))
    assert p(2) == p(5) == 0


def test_profile_breakpoints_at_vertices(F1, K_F1):
    # P_{-K} has vertices at u1 in {-1, 0, 2}; slicing along e1 breaks at x = 1
    p = volume_profile(F1, K_F1, (1, 0))
    assert p.breakpoints == (0, 1, 3)


def test_profile_requires_big(Q):
    with pytest.raises(InvariantError, match="profile undefined"):
        volume_profile(Q, Q.classes["H1"], (1, 0))


def test_tau(P2, L_P2, Q, L_Q, F1, K_F1):
    assert tau(P2, L_P2, (1, 0)) == 3
    assert tau(Q, L_Q, (1, 0)) == 1
    assert tau(F1, K_F1, (0, 1)) == 2


def test_s_values(P2, L_P2, Q, L_Q, F1, K_F1):
    assert s_invariant(P2, L_P2, (1, 0)) == 9
    assert s_invariant(Q, L_Q, (1, 1)) == 6
    assert s_invariant(F1, K_F1, (0, 1)) == Fraction(28, 3)


@pytest.mark.parametrize("name,D,box,v", [
    ("P2", "3H", [(0, 3), (0, 3)], (1, 0)),
    ("P2", "3H", [(0, 3), (0, 3)], (1, 1)),
    ("P2", "3H", [(0, 3), (0, 3)], (-2, 1)),
    ("P1xP1", "H1+2H2", [(0, 1), (0, 2)], (1, 1)),
    ("F1", "-K", [(-1, 2), (-1, 1)], (0, 1)),
    ("F1", "-K", [(-1, 2), (-1, 1)], (1, -2)),
])
def test_s_against_weighted_point_sums(name, D, box, v):
    X = standard_variety(name)
    L = parse_divisor(X, D)
    hp = section_polytope(X, L)
    assert s_invariant(X, L, v) == polarization(X, L).S(v) == ehrhart_s(hp.normals, hp.offsets, box, 2, v)


def test_j_values(P2, L_P2, Q, L_Q, F1, K_F1):
    assert j_invariant(P2, L_P2, (1, 0)) == 18
    assert j_invariant(Q, L_Q, (1, 0)) == 2
    assert j_invariant(F1, K_F1, (0, 1)) == Fraction(20, 3)


def test_slope_and_thresholds(P2, L_P2, Q, L_Q, F1, K_F1):
    assert slope_mu(P2, L_P2) == 1
    assert slope_mu(Q, L_Q) == Fraction(3, 2)
    assert slope_mu(F1, K_F1) == 1
    assert nef_thresholds(P2, L_P2) == (1, 1)
    assert nef_thresholds(Q, L_Q) == (1, 2)
    assert nef_thresholds(F1, K_F1) == (1, 1)


def test_vol_derivative_examples(P2, L_P2, Q):
    assert vol_derivative(P2, L_P2, L_P2) == 18
    D = parse_divisor(Q, "H1+2H2")
    assert vol_derivative(Q, D, parse_divisor(Q, "-2H1-2H2")) == -12
    assert vol_derivative(P2, L_P2, -P2.classes["H"]) == -6


def test_vol_derivative_routes_agree(F1, K_F1):
    G = parse_divisor(F1, "f - C")
    exact = vol_derivative(F1, K_F1, G)
    assert vol_derivative(F1, K_F1, G, method="facet") == exact
    fd = vol_derivative(F1, K_F1, G, method="fd")
    assert isinstance(fd, Approx) and abs(fd.value - exact) <= fd.error + Fraction(1, 10**9)
    # off the ample cone along a slab: still C^1
    # Vol((1+t)L - xF) = (1+t)^n p(x/(1+t)), so the t-derivative is n p - x p'
    p, x = volume_profile(F1, K_F1, (0, 1)), Fraction(1, 2)
    assert vol_derivative(F1, K_F1, K_F1, F=(0, 1), x=x) == 2 * p(x) - x * p.derivative(x) == 15


def test_vol_derivative_needs_big(Q):
    with pytest.raises(InvariantError, match="not big"):
        vol_derivative(Q, Q.classes["H1"], Q.classes["H2"])
    with pytest.raises(ValueError, match="unknown method"):
        vol_derivative(Q, Q.classes["H1"] + Q.classes["H2"], Q.classes["H2"], method="x")


def test_beta_values(P2, L_P2, Q, L_Q, F1, K_F1):
    assert beta_direct(P2, L_P2, (1, 0)) == 0
    assert beta_direct(P2, L_P2, (1, 1)) == 0
    assert log_discrepancy(P2, (1, 1)) == 2 and s_invariant(P2, L_P2, (1, 1)) == 18
    for v in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1)]:
        assert beta_direct(Q, L_Q, v) == 0
    assert beta_direct(F1, K_F1, (0, 1)) == Fraction(-4, 3)
    assert beta_direct(F1, K_F1, (0, -1)) == Fraction(4, 3)


def test_beta_integral_term_p2(P2, L_P2):
    # A Vol = 9, n mu S = 18, so the derivative integral is -27
    K = canonical_class(P2)
    assert derivative_integral(P2, L_P2, (1, 0), K, "swap") == -27
    assert derivative_integral(P2, L_P2, (1, 0), K, "slab") == -27


def test_beta_rewrites(P2, L_P2, Q, L_Q, F1, K_F1):
    assert beta_rewritten(P2, L_P2, (1, 0), "s") == 0
    assert beta_rewritten(Q, L_Q, (1, 1), "stilde") == 0
    for mode in ("s", "stilde"):
        assert beta_rewritten(F1, K_F1, (0, -1), mode) == Fraction(4, 3)
    with pytest.raises(ValueError):
        beta_rewritten(P2, L_P2, (1, 0), "x")


def test_fano_identity(P2, F1, Q):
    assert beta_fano_identity_check(P2, (1, 0))
    assert beta_fano_identity_check(P2, (1, 1))
    assert beta_fano_identity_check(F1, (0, 1))
    P = polarization(F1, anticanonical(F1))
    assert P.A((0, 1)) * P.vol - P.S((0, 1)) == Fraction(-4, 3)


def test_beta_against_s_interpolation(Q, L_Q):
    # independent route: d/dt S_{L+tK}(v) by the profile quadrature at
    # exact nodes, then polynomial interpolation in t
    K = canonical_class(Q)
    for v in [(1, 0), (2, -1), (1, 3)]:
        ts = [Fraction(j, 50) for j in range(4)]
        ys = [s_invariant(Q, L_Q + K * t, v) for t in ts]
        dS = interpolate(ts, ys)[1]
        P = polarization(Q, L_Q)
        assert beta_direct(Q, L_Q, v) == P.A(v) * P.vol + 2 * P.mu * P.S(v) + dS


def test_beta_requires_ample(Q):
    with pytest.raises(InvariantError):
        beta_direct(Q, Q.classes["H1"], (1, 0))


def test_delta(P2, L_P2, Q, F1, K_F1):
    d = delta_toric(P2, L_P2, 5)
    assert d.value == 1 and (1, 0) in d.minimizers
    assert delta_toric(Q, anticanonical(Q), 5).value == 1
    d = delta_toric(F1, K_F1, 5)
    assert d.value == Fraction(6, 7) and d.minimizer == (0, 1)


def test_zeta(P2, L_P2, L_Q, Q, F1, K_F1):
    assert zeta_toric(P2, L_P2, 5).value == 0
    z = zeta_toric(F1, K_F1, 5)
    assert z.value == Fraction(-1, 7) and z.minimizer == (0, 1)
    assert zeta_toric(Q, L_Q, 5).value == 0
    assert "monomial" in z.note


def test_zeta_ud(P2, L_P2, Q, F1, K_F1):
    for X, L, want in [(P2, L_P2, 0), (F1, K_F1, Fraction(-1, 7)), (Q, anticanonical(Q), 0)]:
        r = zeta_ud(X, L, 5, c=1)
        assert r.value == r.zeta == want and r.agrees
        assert 0 < r.filtered <= r.total


def test_zeta_ud_empty_filter(Q, F1, K_F1):
    # away from -K the bound C_L can sit below every beta/S in the budget
    r = zeta_ud(Q, parse_divisor(Q, "H1+5H2"), 1, c=Fraction(1, 10**6))
    assert r.filtered == 0 and not r.agrees
    assert r.value == r.bound == Fraction(-3199999, 10**6) and "empty" in r.note
    assert r.zeta == 0
    with pytest.raises(ValueError):
        zeta_ud(F1, K_F1, 1, c=0)


def test_report(F1, K_F1):
    r = invariant_report(F1, K_F1, (0, 1))
    assert r.beta_direct == r.beta_s_form == r.beta_stilde_form == Fraction(-4, 3)
    assert r.beta_over_S == Fraction(-1, 7)
    assert all(r.exact.values())
    # big but not nef: the report is restricted to the profile part
    D = F1.classes["E"] * 2 + F1.classes["f"]
    r = invariant_report(F1, D, (0, 1))
    assert not r.ample and r.beta_direct is None and r.S == s_invariant(F1, D, (0, 1))


def test_displayed_norm_bound_form_fails(P2, L_P2):
    # Vol(L - xF) >= Vol(L) (x/tau)^n is false at x = 2 on (P^2, 3H, e1),
    # while the concavity form Vol(L) (1 - x/tau)^n holds with equality
    p = volume_profile(P2, L_P2, (1, 0))
    x, t, n = Fraction(2), p.tau, 2
    assert p(x) < volume(P2, L_P2) * (x / t) ** n
    assert p(x) == volume(P2, L_P2) * (1 - x / t) ** n


# ---------------------------------------------------------------------------
# properties over random (X, L, v)
# ---------------------------------------------------------------------------

@given(pairs())
def test_norm_relations(arg):
    X, L, v = arg
    n = X.dim
    P = polarization(X, L)
    vt = P.vol * P.tau(v)
    for q in (P.S(v), P.j(v)):
        assert vt / (n + 1) <= q <= n * vt / (n + 1)


@given(pairs())
def test_concavity_form_of_profile(arg):
    X, L, v = arg
    p = volume_profile(X, L, v)
    vol = volume(X, L)
    for k in range(1, 8):
        x = p.tau * Fraction(k, 8)
        assert p(x) >= vol * (1 - x / p.tau) ** X.dim


@settings(max_examples=25)
@given(pairs())
def test_integration_by_parts(arg):
    X, L, v = arg
    S = s_invariant(X, L, v)
    assert derivative_integral(X, L, v, L, "swap") == (X.dim + 1) * S
    assert derivative_integral(X, L, v, L, "slab") == (X.dim + 1) * S


@settings(max_examples=25)
@given(pairs())
def test_beta_forms_agree(arg):
    X, L, v = arg
    b = beta_direct(X, L, v)
    assert beta_rewritten(X, L, v, "s") == b == beta_rewritten(X, L, v, "stilde")


@settings(max_examples=25)
@given(pairs(), st.fractions(Fraction(1, 5), 5, max_denominator=5))
def test_homogeneity(arg, k):
    X, L, v = arg
    n = X.dim
    assert s_invariant(X, L * k, v) == k ** (n + 1) * s_invariant(X, L, v)
    assert beta_direct(X, L * k, v) == k ** n * beta_direct(X, L, v)


@given(pairs())
def test_slope_sandwich(arg):
    X, L, _ = arg
    s, st_ = nef_thresholds(X, L)
    assert s <= slope_mu(X, L) <= st_


@given(pairs())
def test_self_derivative(arg):
    X, L, _ = arg
    assert vol_derivative(X, L, L) == X.dim * volume(X, L)


@given(pairs(), st.data())
def test_self_derivative_on_big_slab(arg, data):
    X, L, v = arg
    p = volume_profile(X, L, v)
    x = p.tau * Fraction(data.draw(st.integers(1, 9)), 10)
    # Vol((1+t)L - xF) = (1+t)^n p(x/(1+t))
    assert vol_derivative(X, L, L, F=v, x=x) == X.dim * p(x) - x * p.derivative(x)


@settings(max_examples=15)
@given(st.sampled_from(SURFACES).map(standard_variety).flatmap(
    lambda X: st.tuples(st.just(X), st.sampled_from(range(1, 4)))))
def test_delta_relation_and_budget_monotone(arg):
    X, budget = arg
    L = anticanonical(X)
    n = X.dim
    P = polarization(X, L)
    z = zeta_toric(X, L, budget).value
    d = delta_toric(X, L, budget).value
    assert z >= d + n * P.mu - (n + 1) * P.thresholds[1]
    if budget > 1:
        assert z <= zeta_toric(X, L, budget - 1).value
