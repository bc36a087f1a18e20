import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from toraldyn.cartan import (
    CartanElement,
    RootSystemSpec,
    SimpleFactor,
    cartan_dim_bound,
    cartan_entropy,
    check_theorem14_hypotheses,
)
from toraldyn.errors import RankTooLow

SL3 = RootSystemSpec.sl(3)


def brute_entropy(parts, mults):
    """Direct double loop over ordered index pairs."""
    h = Fraction(0)
    for p, m in zip(parts, mults):
        for i in range(len(p)):
            for j in range(len(p)):
                if p[i] - p[j] > 0:
                    h += (p[i] - p[j]) * m
    return h


def test_sl3_example():
    e = cartan_entropy(SL3, CartanElement((1, 0, -1)))
    assert e.entropy == 4
    assert (e.dim_plus, e.dim_minus, e.dim_zero) == (3, 3, 2)
    assert e.dim_total == SL3.dim == 8
    assert json.loads(json.dumps(e.to_dict()))["entropy"] == "4"


def test_zero_element():
    e = cartan_entropy(SL3, CartanElement((0, 0, 0)))
    assert e.entropy == 0 and e.dim_plus == e.dim_minus == 0 and e.dim_zero == 8


def test_trivial_factor_flagged():
    spec = RootSystemSpec.sl(2, 2)
    e = cartan_entropy(spec, CartanElement(((1, -1), (0, 0))))
    assert e.entropy == 2 and e.trivial_factors == (1,)


def test_hypothesis_checks():
    a1 = CartanElement((1, 0, -1))
    assert check_theorem14_hypotheses(SL3, a1, CartanElement((0, 1, -1))).passed
    r = check_theorem14_hypotheses(SL3, a1, CartanElement((2, 0, -2)))
    assert not r.passed and r.failing == (0,)
    spec = RootSystemSpec.sl(3, 3)
    mixed = check_theorem14_hypotheses(
        spec, CartanElement(((1, 0, -1), (1, 0, -1))), CartanElement(((0, 1, -1), (2, 0, -2)))
    )
    assert not mixed.passed and mixed.failing == (1,)
    assert mixed.to_dict()["factors"][0]["independent"] is True
    with pytest.raises(RankTooLow):
        check_theorem14_hypotheses(RootSystemSpec.sl(2, 2), CartanElement(((1, -1), (1, -1))),
                                   CartanElement(((1, -1), (2, -2))))


def test_dim_bound_examples():
    b = cartan_dim_bound(SL3, CartanElement((1, 0, -1)))
    assert b.bound == 8 and b.valid and (b.dim_plus, b.dim_minus, b.dim_zero) == (3, 3, 2)
    z = cartan_dim_bound(SL3, CartanElement((0, 0, 0)))
    assert z.bound == 8 and not z.valid and z.flags
    with pytest.raises(RankTooLow):
        cartan_dim_bound(RootSystemSpec.sl(2, 2), CartanElement(((1, -1), (1, -1))))


def test_dim_bound_intermediate_and_monotone():
    a1 = CartanElement((1, 0, -1))
    vals = [cartan_dim_bound(SL3, a1, d).bound for d in (0, 6, 7, 7.5, 7.9, 8)]
    assert vals == sorted(vals) and vals[-1] == 8
    assert cartan_dim_bound(SL3, a1, 7.5).bound == pytest.approx(6.0, abs=1e-12)


def test_validation():
    with pytest.raises(ValueError):
        CartanElement((1, 1, 0))
    with pytest.raises(ValueError):
        CartanElement((1, -1)).check(SL3)
    with pytest.raises(ValueError):
        SimpleFactor(1)
    spec = RootSystemSpec.from_dict({"factors": [3, {"n": 4, "multiplicity": 2}]})
    assert spec.dim == 8 + (12 * 2 + 3) and spec.rank == 5 and spec.eligible


@st.composite
def spec_and_element(draw):
    ns = draw(st.lists(st.integers(2, 5), min_size=1, max_size=3))
    mults = draw(st.lists(st.integers(1, 2), min_size=len(ns), max_size=len(ns)))
    parts = []
    for n in ns:
        xs = [Fraction(draw(st.integers(-6, 6)), draw(st.integers(1, 4))) for _ in range(n - 1)]
        parts.append(xs + [-sum(xs)])
    spec = RootSystemSpec(tuple(SimpleFactor(n, m) for n, m in zip(ns, mults)))
    return spec, CartanElement(parts), mults


@given(spec_and_element())
def test_entropy_properties(data):
    spec, t, mults = data
    e = cartan_entropy(spec, t)
    assert e.entropy == brute_entropy(t.parts, mults)
    assert cartan_entropy(spec, -t).entropy == e.entropy
    assert e.dim_total == spec.dim
    assert e.dim_plus == e.dim_minus


@given(spec_and_element(), st.fractions(min_value=Fraction(1, 10), max_value=10))
def test_positive_homogeneity(data, c):
    spec, t, _ = data
    assert cartan_entropy(spec, t.scaled(c)).entropy == c * cartan_entropy(spec, t).entropy


@given(spec_and_element(), spec_and_element())
def test_additivity_over_factors(a, b):
    (sa, ta, _), (sb, tb, _) = a, b
    joint = RootSystemSpec(sa.factors + sb.factors)
    t = CartanElement(ta.parts + tb.parts)
    assert cartan_entropy(joint, t).entropy == cartan_entropy(sa, ta).entropy + cartan_entropy(sb, tb).entropy
