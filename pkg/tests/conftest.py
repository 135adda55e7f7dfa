from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from valstab.invariants import _candidates
from valstab.toric import is_ample, nef_cone_generators, standard_variety

settings.register_profile(
    "valstab", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("valstab")

NAMES = ["P2", "P1xP1", "F1", "P3", "P1xP1xP1"]
SURFACES = ["P2", "P1xP1", "F1"]


@pytest.fixture(scope="session")
def P2():
    return standard_variety("P2")


@pytest.fixture(scope="session")
def Q():
    return standard_variety("P1xP1")


@pytest.fixture(scope="session")
def F1():
    return standard_variety("F1")


@st.composite
def ample_classes(draw, X):
    """Positive combinations of nef generators shifted by a principal divisor."""
    L = X.zero()
    for g in nef_cone_generators(X):
        L = L + g * Fraction(draw(st.integers(1, 10)), draw(st.integers(1, 4)))
    L = L + X.principal([draw(st.integers(-2, 2)) for _ in range(X.dim)])
    assert is_ample(X, L)
    return L


def valuations(X, budget: int = 3):
    return st.sampled_from(_candidates(X.dim, budget))


@st.composite
def pairs(draw, names=tuple(NAMES)):
    X = standard_variety(draw(st.sampled_from(names)))
    return X, draw(ample_classes(X)), draw(valuations(X))
