import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from toraldyn import _exact
from toraldyn.action import (
    CommutingPair,
    commutes,
    corpus_lines,
    find_commuting_partners,
    invariant_blocks,
    multiplicative_dependence,
    rank_one_factor_scan,
)
from toraldyn.errors import DimensionMismatch, ReducibleSeed
from toraldyn.spectral import ToralMap, entropy_report

CAT = ToralMap([[2, 1], [1, 1]])


def pair(t, s):
    return CommutingPair.build(ToralMap(t) if not isinstance(t, ToralMap) else t,
                               ToralMap(s) if not isinstance(s, ToralMap) else s)


def test_commutes_examples():
    assert commutes(CAT, CAT.power(2))
    assert commutes(ToralMap([[2]]), ToralMap([[3]]))
    assert not commutes(ToralMap([[1, 1], [0, 1]]), ToralMap([[1, 0], [1, 1]]))
    with pytest.raises(DimensionMismatch):
        commutes(CAT, ToralMap([[2]]))


def test_dependence_examples():
    assert multiplicative_dependence(pair([[2]], [[8]]), 20).relation == (3, 1)
    cert = multiplicative_dependence(pair([[2]], [[3]]), 20)
    assert cert.relation is None and cert.search_bound == 20
    assert cert.log_ratio_witness
    assert multiplicative_dependence(pair(CAT, CAT.power(2)), 20).relation == (2, 1)


def test_no_relation_oracle_two_three():
    # exhaustive exact re-verification: 2^t = 3^s has no solution with 0 < max(t, s) <= 20
    hits = [(t, s) for t in range(21) for s in range(21) if (t or s) and 2**t == 3**s]
    assert hits == []


def test_negative_exponents_only_for_automorphisms():
    cert = multiplicative_dependence(pair(CAT, CAT.inverse()), 5)
    t, s = cert.relation
    assert CAT.power(t) == CAT.inverse().power(s)
    # x2 and x(1/2) is not a toral pair; for endomorphisms exponents stay nonnegative
    cert = multiplicative_dependence(pair([[4]], [[2]]), 5)
    assert cert.relation == (1, 2)


@given(st.integers(1, 4), st.integers(1, 4))
def test_relations_reverify_exactly(i, j):
    t_map, s_map = CAT.power(i), CAT.power(j)
    cert = multiplicative_dependence(pair(t_map, s_map), 10)
    t, s = cert.relation
    assert t_map.power(t) == s_map.power(s)


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 8))
def test_bound_monotone(i, j, extra):
    p = pair(CAT.power(i), CAT.power(j))
    small = multiplicative_dependence(p, 4).relation
    large = multiplicative_dependence(p, 4 + extra).relation
    if small is not None:
        assert large is not None and large <= small


def test_entropy_consistency_of_relations():
    p = pair(CAT.power(2), CAT.power(3))
    t, s = multiplicative_dependence(p, 10).relation
    a, b = entropy_report(p.t_map), entropy_report(p.s_map)
    assert abs(t * a.h_top - s * b.h_top) <= t * a.h_top_error + s * b.h_top_error + 1e-12


def test_partners_of_cat_companion():
    seed = ToralMap.companion([1, -3, 1])
    parts = find_commuting_partners(seed, 3)
    m_minus_i = ToralMap(_exact.mat_add(seed.entries, _exact.mat_scale(-1, _exact.identity(2))))
    assert m_minus_i in parts
    for p in parts:
        assert commutes(seed, p) and abs(p.det) == 1
        for k in (-2, -1, 0, 1, 2):
            assert p != seed.power(k) and p != ToralMap(_exact.mat_scale(-1, seed.power(k).entries))


def test_partners_of_linear_seed_empty():
    assert find_commuting_partners(ToralMap.companion([1, -2]), 3) == []


def test_partners_of_cubic_seed():
    seed = ToralMap.companion([1, 0, -1, -1])
    parts = find_commuting_partners(seed, 2)
    assert parts
    for p in parts:
        assert _exact.mat_mul(seed.entries, p.entries) == _exact.mat_mul(p.entries, seed.entries)
        assert _exact.determinant(p.entries) in (1, -1)


def test_reducible_seed():
    with pytest.raises(ReducibleSeed):
        find_commuting_partners(ToralMap([[2, 0], [0, 3]]), 2)


def test_rank_one_scan_examples():
    assert rank_one_factor_scan(pair([[2]], [[2]]), 20).overall == "rank-one factor found"
    assert rank_one_factor_scan(pair([[2]], [[3]]), 20).overall == "none found up to bound"
    rep = rank_one_factor_scan(pair([[2, 0], [0, 2]], [[3, 0], [0, 2]]), 20)
    assert rep.overall == "rank-one factor found"
    dependent = [b for b in rep.blocks if b.relation is not None]
    assert len(dependent) == 1 and dependent[0].relation == (1, 1)


def test_blocks_are_jointly_invariant():
    t = ToralMap([[2, 0, 0], [0, 2, 1], [0, 1, 1]])
    s = ToralMap([[3, 0, 0], [0, 3, 1], [0, 1, 2]])
    p = pair(t, s)
    assert p.verified_commuting
    import sympy

    for basis in invariant_blocks(p):
        for m in (t, s):
            img = sympy.Matrix(m.entries) * basis
            # image stays inside the column span
            assert sympy.Matrix.hstack(basis, img).rank() == basis.shape[1]


def test_corpus_lines_are_json():
    import json

    seed = ToralMap.companion([1, -3, 1])
    pairs = [CommutingPair.build(seed, p) for p in find_commuting_partners(seed, 2)]
    for line in corpus_lines(pairs):
        d = json.loads(line)
        assert {"T", "S", "verified_commuting", "hyperbolic_both", "independent_up_to_bound", "rank_one_scan"} <= set(d)
        assert math.isfinite(d["bound"])
