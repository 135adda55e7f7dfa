from __future__ import annotations

import json
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import NAMES, ample_classes
from oracles import ehrhart_volume
from valstab.ratgeom import dual_description
from valstab.toric import (
    DivisorClass,
    NotQCartierError,
    ToricError,
    ToricValuation,
    ToricVariety,
    anticanonical,
    canonical_class,
    cartier_data,
    check_q_gorenstein,
    degree_by_facets,
    enumerate_valuations,
    intersection_number,
    is_ample,
    is_big,
    is_nef,
    linearly_equivalent,
    load_variety,
    log_discrepancy,
    nef_cone_generators,
    parse_divisor,
    parse_valuation,
    section_polytope,
    standard_variety,
    variety_from_dict,
    volume,
)


def cube_fan() -> ToricVariety:
    rays = list(product((-1, 1), repeat=3))
    cones = [tuple(k for k, r in enumerate(rays) if r[i] == s) for i in range(3) for s in (-1, 1)]
    return ToricVariety(tuple(rays), tuple(cones), "cube")


def test_canonical_class(P2, Q, F1):
    assert canonical_class(P2).coeffs == (-1, -1, -1)
    assert canonical_class(Q).coeffs == (-1,) * 4
    assert canonical_class(F1).coeffs == (-1,) * 4


def test_section_polytopes(P2, Q, F1):
    vp = dual_description(section_polytope(P2, P2.classes["H"] * 3))
    assert set(vp.vertices) == {(0, 0), (3, 0), (0, 3)}
    vp = dual_description(section_polytope(Q, parse_divisor(Q, "H1+2H2")))
    assert set(vp.vertices) == {(0, 0), (1, 0), (0, 2), (1, 2)}
    vp = dual_description(section_polytope(F1, anticanonical(F1)))
    assert set(vp.vertices) == {(-1, -1), (0, -1), (2, 1), (-1, 1)}


def test_positivity(P2, Q, F1):
    assert is_ample(P2, P2.classes["H"] * 3)
    assert is_ample(F1, anticanonical(F1))
    H1 = Q.classes["H1"]
    assert is_nef(Q, H1) and not is_ample(Q, H1) and not is_big(Q, H1)
    E = F1.classes["E"]
    assert is_big(F1, E * 2 + F1.classes["f"]) and not is_nef(F1, E * 2 + F1.classes["f"])


def test_log_discrepancy(P2, Q):
    assert log_discrepancy(P2, (1, 0)) == 1
    assert log_discrepancy(P2, (1, 1)) == 2
    assert log_discrepancy(Q, (2, 1)) == 3
    assert log_discrepancy(P2, ToricValuation((-1, -1))) == 1


def test_volumes_against_section_counting(P2, Q, F1):
    # Vol = n! * leading Ehrhart coefficient of the section polytope
    for X, D, box, want in [
        (P2, P2.classes["H"] * 3, [(0, 3), (0, 3)], 9),
        (Q, parse_divisor(Q, "H1+2H2"), [(0, 1), (0, 2)], 4),
        (F1, anticanonical(F1), [(-1, 2), (-1, 1)], 8),
    ]:
        hp = section_polytope(X, D)
        assert volume(X, D) == want == ehrhart_volume(hp.normals, hp.offsets, box, 2)


def test_intersection_numbers(Q, F1):
    H1, H2 = Q.classes["H1"], Q.classes["H2"]
    assert intersection_number(Q, H1, H2) == 1
    assert intersection_number(Q, H1, H1) == 0
    K = anticanonical(F1)
    assert intersection_number(F1, K, K) == 8
    assert intersection_number(F1, F1.classes["C"], F1.classes["C"]) == 1
    assert intersection_number(F1, F1.classes["f"], F1.classes["C"]) == 1


def test_mixed_degree_two_routes(Q):
    L = parse_divisor(Q, "H1+2H2")
    assert intersection_number(Q, anticanonical(Q), L) == degree_by_facets(Q, anticanonical(Q), L) == 6


def test_threefold_volumes():
    assert volume(standard_variety("P3"), anticanonical(standard_variety("P3"))) == 64
    X = standard_variety("P1xP1xP1")
    assert volume(X, anticanonical(X)) == 48


def test_non_simplicial_fan():
    X = cube_fan()
    assert not X.is_simplicial()
    assert check_q_gorenstein(X)
    assert log_discrepancy(X, (1, 0, 0)) == 1
    assert volume(X, anticanonical(X)) == 8  # 3! * vol(octahedron)
    with pytest.raises(NotQCartierError):
        cartier_data(X, X.ray_divisor(0))


def test_nef_cone_generators(Q, F1):
    gens = nef_cone_generators(Q)
    assert {tuple(g.coeffs) for g in gens} == {(0, 1, 0, 0), (0, 0, 0, 1)}
    for g in nef_cone_generators(F1):
        assert is_nef(F1, g) and not is_ample(F1, g)


def test_linear_equivalence(F1):
    assert linearly_equivalent(F1, F1.classes["C"], F1.classes["E"] + F1.classes["f"])
    assert linearly_equivalent(F1, anticanonical(F1), parse_divisor(F1, "f + 2C"))


def test_parse_divisor(P2, F1):
    assert parse_divisor(P2, "3H") == P2.classes["H"] * 3
    assert parse_divisor(F1, "-K + 1/100 f") == anticanonical(F1) + F1.classes["f"] / 100
    assert parse_divisor(F1, "1,0,0,1/3") == DivisorClass([1, 0, 0, Fraction(1, 3)])
    with pytest.raises(ValueError, match="column"):
        parse_divisor(F1, "f ** C")
    with pytest.raises(ValueError, match="unknown class"):
        parse_divisor(F1, "H")


def test_parse_valuation():
    assert parse_valuation("e1", 2).v == (1, 0)
    assert parse_valuation("-e2", 2).v == (0, -1)
    assert parse_valuation("(2,1)", 2).v == (2, 1)
    with pytest.raises(ToricError, match="primitive"):
        parse_valuation("(2,2)", 2)
    with pytest.raises(ToricError, match="nonzero"):
        parse_valuation("(0,0)", 2)


def test_variety_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"rank": 2,\n "rays": [[1, 0], [0, 1]\n')
    with pytest.raises(ValueError, match="line 3 column"):
        load_variety(bad)
    with pytest.raises(ValueError, match="not primitive"):
        variety_from_dict({"rank": 2, "rays": [[2, 0], [0, 1], [-1, -1]], "cones": [[0, 1]]})
    with pytest.raises(ValueError, match="missing key"):
        variety_from_dict({"rank": 2, "rays": [[1, 0]]})


def test_variety_file_round_trip(F1, tmp_path):
    p = tmp_path / "f1.json"
    p.write_text(json.dumps(F1.to_dict()))
    Y = load_variety(p)
    assert Y == F1 and dict(Y.named) == dict(F1.named)


def test_enumerate_valuations():
    assert len(enumerate_valuations(2, 1)) == 8
    assert len(enumerate_valuations(2, 2)) == 16
    assert len(enumerate_valuations(3, 1)) == 26
    vs = [w.v for w in enumerate_valuations(2, 3)]
    assert vs == sorted(vs)
    assert (1, 0) in vs and (-1, 0) in vs


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

@st.composite
def variety_and_ample(draw):
    X = standard_variety(draw(st.sampled_from(NAMES)))
    return X, draw(ample_classes(X))


@given(variety_and_ample())
def test_volume_equals_self_intersection_on_nef(arg):
    X, L = arg
    assert volume(X, L) == intersection_number(X, *([L] * X.dim))


@given(variety_and_ample(), st.fractions(Fraction(1, 7), 5, max_denominator=7))
def test_volume_homogeneity(arg, a):
    X, L = arg
    assert volume(X, L * a) == a ** X.dim * volume(X, L)


@given(variety_and_ample(), st.data())
def test_volume_monotone_under_effective_addition(arg, data):
    X, L = arg
    B = DivisorClass([Fraction(data.draw(st.integers(0, 3)), data.draw(st.integers(1, 3)))
                      for _ in range(X.nrays)])
    assert volume(X, L + B) >= volume(X, L)


@given(st.sampled_from(["P1xP1", "F1", "P1xP1xP1"]).map(standard_variety).flatmap(
    lambda X: st.tuples(st.just(X), ample_classes(X), ample_classes(X), ample_classes(X))))
def test_intersection_symmetric_multilinear(arg):
    X, A, B, C = arg
    n = X.dim
    rest = [A] * (n - 2)
    ab = intersection_number(X, A, B, *rest)
    assert ab == intersection_number(X, B, A, *rest)
    assert intersection_number(X, A + C, B, *rest) == ab + intersection_number(X, C, B, *rest)
    assert intersection_number(X, A * 3, B, *rest) == 3 * ab


@pytest.mark.parametrize("name", NAMES)
def test_log_discrepancy_one_on_rays(name):
    X = standard_variety(name)
    assert all(log_discrepancy(X, r) == 1 for r in X.rays)


@given(variety_and_ample())
def test_ample_implies_nef_and_big(arg):
    X, L = arg
    assert is_ample(X, L) and is_nef(X, L) and is_big(X, L)
