import csv
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toraldyn.errors import DepthTooCoarse
from toraldyn.orbits import (
    TorusPoint,
    allowed_steps,
    avoid_check,
    dyadic_discrepancy,
    epsilon_dense,
    first_ball_visit,
    iterate,
    iterate_two_sided,
    precision_for,
    trace_from_points,
    verdict_json,
    write_histogram_csv,
    write_step_ranges_csv,
)
from toraldyn.spectral import ToralMap
from toraldyn.symbolic import BallSpec, SftSpec, parry_sample, perron

CAT = ToralMap([[2, 1], [1, 1]])
X2, X3 = ToralMap.scalar(2), ToralMap.scalar(3)


def brute_orbit(m, start, n):
    """Exact orbit in Fractions by repeated matrix-vector products mod 1."""
    x = list(start.coords())
    out = []
    for _ in range(n):
        out.append(tuple(x))
        x = [sum(c * v for c, v in zip(row, x)) % 1 for row in m.entries]
    return out


def brute_cell(point, depth):
    return sum(math.floor(c * 2**depth) << (depth * k) for k, c in enumerate(point))


def check_against_brute(m, start, n, depth):
    tr = iterate(m, start, n, depth)
    pts = brute_orbit(m, start, tr.length)
    for k, p in enumerate(pts):
        assert tr.cells[k] == brute_cell(p, depth)
        for j, c in enumerate(p):
            scaled = c * 2**64
            assert int(tr.lo[k, j]) <= scaled < int(tr.lo[k, j]) + int(tr.err[k])
    return tr


@settings(max_examples=25)
@given(st.integers(2, 7), st.integers(0, 2**200), st.integers(1, 10))
def test_scalar_windows_match_exact(a, seed, depth):
    start = TorusPoint.from_fractions(Fraction(seed % 2**120, 2**120), 2, 120)
    n = min(60, allowed_steps(ToralMap.scalar(a), start))
    check_against_brute(ToralMap.scalar(a), start, n, depth)


@settings(max_examples=15)
@given(st.integers(0, 3**90 - 1), st.integers(1, 8))
def test_ternary_start_windows_match_exact(num, depth):
    start = TorusPoint((num,), 3, 90)
    check_against_brute(X2, start, 40, depth)
    check_against_brute(X3, start, 90, depth)


@settings(max_examples=15)
@given(st.integers(0, 2**128 - 1), st.integers(0, 2**128 - 1), st.integers(1, 6))
def test_cat_map_windows_match_exact(p, q, depth):
    start = TorusPoint((p, q), 2, 128)
    tr = check_against_brute(CAT, start, 25, depth)
    assert tr.precision_exhausted_at is None


def test_shift_consistency_random_words():
    rng = np.random.default_rng(1234)
    depth = 7
    for _ in range(100):
        digits = rng.integers(0, 2, 1000 + depth).astype(np.uint8)
        tr = iterate(X2, TorusPoint.from_digits(digits, 2), 1000, depth)
        windows = np.lib.stride_tricks.sliding_window_view(digits, depth)[:1000]
        expect = windows @ (1 << np.arange(depth - 1, -1, -1))
        assert np.array_equal(tr.cells, expect)


def test_period_two_orbit():
    P = 64
    digits = np.array([0, 1] * (P // 2), dtype=np.uint8)
    tr = iterate(X2, TorusPoint.from_digits(digits), P - 4, 3)
    assert set(tr.cells.tolist()) == {2, 5}
    v = epsilon_dense(tr, 1 / 8)
    assert not v.achieved and v.empty_cells == 6 and v.n_cells == 8


def test_cat_map_fixed_point():
    tr = iterate(CAT, TorusPoint((0, 0), 2, precision_for(CAT, 2, 500)), 500, 4)
    assert tr.length == 500 and np.all(tr.cells == 0)
    assert tr.precision_exhausted_at is None


def _van_der_corput(n, bits):
    return [Fraction(int(format(k, f"0{bits}b")[::-1], 2), 2**bits) for k in range(n)]


def test_van_der_corput_dense_and_equidistributed():
    tr = trace_from_points(_van_der_corput(4096, 12), 6)
    v = epsilon_dense(tr, 1 / 64)
    assert v.achieved and v.first_cover_step == 64
    big = trace_from_points(_van_der_corput(2**16, 16), 8)
    assert dyadic_discrepancy(big) < 0.01


def test_discrepancy_brute_force():
    rng = np.random.default_rng(5)
    pts = [Fraction(int(x), 2**20) for x in rng.integers(0, 2**20, 300)]
    tr = trace_from_points(pts, 5)
    worst = 0.0
    for level in range(6):
        for j in range(2**level):
            box = sum(1 for p in pts if Fraction(j, 2**level) <= p < Fraction(j + 1, 2**level))
            worst = max(worst, abs(box / 300 - 2.0**-level))
    assert dyadic_discrepancy(tr) == pytest.approx(worst, abs=1e-15)


def test_empty_trace_verdict():
    tr = iterate(X2, TorusPoint((0,), 2, 10), 0, 7)
    v = epsilon_dense(tr, 0.02)
    assert not v.achieved and v.discrepancy == 1.0 and v.empty_cells == v.n_cells
    assert json.loads(verdict_json(v))["achieved"] is False


def test_depth_too_coarse():
    tr = iterate(X2, TorusPoint((1,), 2, 10), 5, 3)
    with pytest.raises(DepthTooCoarse):
        epsilon_dense(tr, 0.02)


def test_depth_limit():
    with pytest.raises(ValueError):
        iterate(CAT, TorusPoint((0, 0), 2, 8), 3, 32)


@given(st.integers(1, 400), st.integers(1, 2000))
def test_precision_exhaustion(P, N):
    start = TorusPoint((2**P // 3,), 2, P)
    tr = iterate(X3, start, N, 4)
    budget = allowed_steps(X3, start)
    assert int(tr.visits.sum()) == min(N, budget)
    assert tr.precision_exhausted_at == (budget if budget < N else None)


def test_precision_budget_values():
    assert precision_for(X3, 2, 10**6) == 1585025
    assert precision_for(X2, 2, 100) == 100
    assert allowed_steps(ToralMap.scalar(4), TorusPoint((0,), 2, 10)) == 5
    P = precision_for(CAT, 2, 50)
    assert allowed_steps(CAT, TorusPoint((0, 0), 2, P)) >= 50
    assert allowed_steps(CAT, TorusPoint((0, 0), 2, P - 1)) < 50


def test_precision_doubling_oracle():
    """Traces of a length-P sample and its length-2P extension agree where both are exact."""
    spec = SftSpec.from_words(2, ["11"])
    pd = perron(spec)
    P, depth = 100_000, 7
    short = parry_sample(spec, pd, P, seed=9)
    long = parry_sample(spec, pd, 2 * P, seed=9)
    N = P - depth + 1
    a = iterate(X3, TorusPoint.from_digits(short), 10**9, depth)
    b = iterate(X3, TorusPoint.from_digits(long), 10**9, depth)
    n = a.length  # x3 budget of the short sample
    assert n < N and b.length > n
    assert np.array_equal(a.cells, b.cells[:n])
    c = iterate(X2, TorusPoint.from_digits(short), N, depth)
    d = iterate(X2, TorusPoint.from_digits(long), N, depth)
    assert np.array_equal(c.visits, d.visits)


def test_avoid_examples():
    ball = BallSpec(Fraction(7, 8), Fraction(1, 8))
    assert first_ball_visit(iterate(X2, TorusPoint.from_fractions(Fraction(7, 8), 2, 3), 3, 4), ball) == 0
    zero = iterate(X2, TorusPoint((0,), 2, 64), 64, 4)
    assert avoid_check(zero, BallSpec(Fraction(1, 2), Fraction(1, 4)))
    # "11" followed by a nonzero digit lands strictly inside (3/4, 1)
    digits = np.array([0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 0, 0], dtype=np.uint8)
    tr = iterate(X2, TorusPoint.from_digits(digits), 12, 4)
    assert first_ball_visit(tr, ball) == 4


def test_boundary_points_are_outside_open_ball():
    # 0.11000... = 3/4 sits on the boundary of the open ball (3/4, 1)
    digits = np.array([1, 1] + [0] * 40, dtype=np.uint8)
    tr = iterate(X2, TorusPoint.from_digits(digits), 20, 4)
    assert avoid_check(tr, BallSpec(Fraction(7, 8), Fraction(1, 8)))


@settings(max_examples=40)
@given(
    st.lists(st.sampled_from([0, 1]), min_size=8, max_size=48),
    st.integers(0, 15),
    st.integers(2, 5),
)
def test_first_visit_matches_fraction_oracle(word, c, k):
    ball = BallSpec(Fraction(c, 16), Fraction(1, 2**k))
    digits = np.array(word, dtype=np.uint8)
    start = TorusPoint.from_digits(digits)
    tr = iterate(X2, start, len(word), 5)
    expect = next((n for n, p in enumerate(brute_orbit(X2, start, tr.length)) if ball.contains(p)), None)
    assert first_ball_visit(tr, ball) == expect


def test_two_sided_cat_orbit():
    start = TorusPoint((3, 5), 2, 96)
    tr = iterate_two_sided(CAT, start, 10, 3)
    assert tr.length == 19
    back = brute_orbit(CAT.inverse(), start, 10)
    assert [brute_cell(p, 3) for p in back] == tr.backward.cells.tolist()
    with pytest.raises(ValueError):
        iterate_two_sided(ToralMap([[2, 0], [0, 1]]), start, 3, 3)


def test_exact_point_and_summary():
    start = TorusPoint.from_fractions(Fraction(5, 32), 2, 80)
    tr = iterate(X3, start, 5, 3)
    assert tr.exact_point(2) == (Fraction(45, 32) % 1,)
    s = tr.summary()
    assert s["length"] == 5 and s["n_cells"] == 8


def test_csv_exports(tmp_path):
    tr = iterate(X3, TorusPoint.from_fractions(Fraction(1, 64), 2, 120), 30, 3)
    write_histogram_csv(tr, tmp_path / "h.csv")
    write_step_ranges_csv(tr, tmp_path / "r.csv", block=10)
    rows = list(csv.DictReader(open(tmp_path / "h.csv")))
    assert sum(int(r["visits"]) for r in rows) == 30 and len(rows) == 8
    ranges = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert [int(r["step_end"]) for r in ranges] == [10, 20, 30]


def test_budget_too_small_is_reported():
    tr = iterate(CAT, TorusPoint((0, 0), 2, 64), 500, 4)
    assert tr.length == 1 and tr.precision_exhausted_at == 1


def test_torus_point_validation():
    with pytest.raises(ValueError):
        TorusPoint.from_fractions(Fraction(1, 3), 2, 10)
    with pytest.raises(ValueError):
        TorusPoint((1024,), 2, 10)
    assert TorusPoint.from_digits([1, 2], 3).coords() == (Fraction(5, 9),)
