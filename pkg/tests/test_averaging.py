import csv
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toraldyn.averaging import (
    GridMeasure,
    cesaro_average,
    cesaro_curve,
    coarsen,
    distance_to_uniform,
    overlap_pattern,
    parry_grid_measure,
    pushforward,
    write_curve_csv,
    write_measure_csv,
)
from toraldyn.errors import IncompatibleGrid
from toraldyn.spectral import ToralMap
from toraldyn.symbolic import BallSpec, SftSpec, avoid_ball_sft, perron

GOLDEN = SftSpec.from_words(2, ["11"])


def random_measure(rng, depth, dim=1, exact=False):
    n = (2**depth) ** dim
    raw = rng.integers(0, 10, n)
    raw[rng.integers(0, n)] += 1
    if exact:
        tot = int(raw.sum())
        return GridMeasure(depth, dim, np.array([Fraction(int(x), tot) for x in raw], dtype=object))
    return GridMeasure(depth, dim, raw / raw.sum())


def midpoint_pattern(entries, r=6):
    """Overlap fractions of the unit cell's image, by the midpoint rule on a 2**r sub-grid."""
    M = np.array(entries)
    k = 2**r
    g = (np.arange(k) + 0.5) / k
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    img = np.floor(pts @ M.T).astype(int)
    keys, counts = np.unique(img, axis=0, return_counts=True)
    return {tuple(int(v) for v in key): c / len(pts) for key, c in zip(keys, counts)}


def test_uniform_is_invariant():
    for m in (2, 3, -5, ToralMap([[2, 1], [1, 1]])):
        dim = 2 if isinstance(m, ToralMap) else 1
        u = GridMeasure.uniform(4, dim, exact=True)
        assert list(pushforward(u, m).weights) == list(u.weights)


def test_point_mass_under_doubling():
    m = 6
    for j in (0, 5, 63):
        out = pushforward(GridMeasure.point_mass(j, m, exact=True), 2)
        nz = {i: w for i, w in enumerate(out.weights) if w}
        assert nz == {(2 * j) % 64: Fraction(1, 2), (2 * j + 1) % 64: Fraction(1, 2)}


def test_point_mass_distance():
    for m in (1, 4, 8):
        tv, md = distance_to_uniform(GridMeasure.point_mass(0, m))
        assert tv == pytest.approx(1 - 2.0**-m, abs=1e-15)
        assert md == pytest.approx(1 - 2.0**-m, abs=1e-15)
    assert distance_to_uniform(GridMeasure.uniform(5)) == (0.0, 0.0)


@settings(max_examples=30)
@given(
    st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3)).filter(
        lambda t: t[0] * t[3] - t[1] * t[2] != 0
    )
)
def test_2d_pattern_exact_and_matches_midpoint_rule(t):
    a, b, c, d = t
    pat = dict(overlap_pattern(((a, b), (c, d))))
    assert sum(pat.values()) == 1
    approx = midpoint_pattern([[a, b], [c, d]])
    for key in set(pat) | set(approx):
        assert float(pat.get(key, 0)) == pytest.approx(approx.get(key, 0), abs=0.05)


@settings(max_examples=30)
@given(st.integers(0, 2**32), st.sampled_from([2, 3, -2, 5, 7]), st.integers(1, 8))
def test_mass_conservation_1d(seed, a, depth):
    mu = random_measure(np.random.default_rng(seed), depth)
    assert abs(pushforward(mu, a).total_mass() - 1) <= 1e-12


@settings(max_examples=20)
@given(
    st.integers(0, 2**32),
    st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3)).filter(
        lambda t: t[0] * t[3] - t[1] * t[2] != 0
    ),
)
def test_mass_conservation_and_haar_2d(seed, t):
    m = ToralMap([[t[0], t[1]], [t[2], t[3]]])
    mu = random_measure(np.random.default_rng(seed), 3, 2)
    assert abs(pushforward(mu, m).total_mass() - 1) <= 1e-12
    u = GridMeasure.uniform(3, 2, exact=True)
    assert all(w == Fraction(1, 64) for w in pushforward(u, m).weights)


@settings(max_examples=20)
@given(st.integers(0, 2**32), st.sampled_from([2, 3, 5, -3]), st.sampled_from([2, 3, 7]))
def test_scalar_pushforwards_commute_exactly(seed, a, b):
    mu = random_measure(np.random.default_rng(seed), 5, exact=True)
    ab = pushforward(pushforward(mu, a), b)
    ba = pushforward(pushforward(mu, b), a)
    assert list(ab.weights) == list(ba.weights)


@settings(max_examples=10)
@given(st.integers(0, 2**32))
def test_diagonal_pushforwards_commute_exactly(seed):
    mu = random_measure(np.random.default_rng(seed), 3, 2, exact=True)
    S, T = ToralMap([[2, 0], [0, 3]]), ToralMap([[3, 0], [0, -2]])
    assert list(pushforward(pushforward(mu, S), T).weights) == list(pushforward(pushforward(mu, T), S).weights)


def test_grid_projection_breaks_commutation_for_cat_powers():
    # documented limitation: cell-uniform smearing does not commute for M and M^2
    M = ToralMap([[2, 1], [1, 1]])
    mu = GridMeasure.point_mass(5, 3, 2, exact=True)
    a = pushforward(pushforward(mu, M), M.power(2))
    b = pushforward(pushforward(mu, M.power(2)), M)
    assert list(a.weights) != list(b.weights)
    assert a.total_mass() == b.total_mass() == 1


def test_incompatible_grids():
    with pytest.raises(IncompatibleGrid):
        pushforward(GridMeasure.uniform(2, 3), ToralMap.scalar(2, 3))
    with pytest.raises(IncompatibleGrid):
        pushforward(GridMeasure.uniform(2, 2), ToralMap([[1, 2], [2, 4]]))
    with pytest.raises(IncompatibleGrid):
        pushforward(GridMeasure.uniform(2, 1), 0)
    with pytest.raises(IncompatibleGrid):
        pushforward(GridMeasure.uniform(2, 1), ToralMap([[2, 0], [0, 2]]))


def test_measure_validation():
    with pytest.raises(ValueError):
        GridMeasure(2, 1, np.array([0.5, 0.5, 0.5, -0.5]))
    with pytest.raises(ValueError):
        GridMeasure(2, 1, np.full(3, 1 / 3))


def test_parry_weights_are_shift_invariant_across_depths():
    pd = perron(GOLDEN)
    fine = parry_grid_measure(GOLDEN, pd, 9)
    coarse = parry_grid_measure(GOLDEN, pd, 8)
    pushed = coarsen(pushforward(fine, 2), 8)
    assert np.abs(pushed.weights - coarse.weights).max() < 1e-12
    # consistency of cylinder weights under coarsening
    assert np.abs(coarsen(fine, 8).weights - coarse.weights).max() < 1e-12


def test_parry_cylinders_closed_form():
    mu = parry_grid_measure(GOLDEN, perron(GOLDEN), 1)
    phi = (1 + 5**0.5) / 2
    # stationary frequency of digit 1 is 1 / (1 + phi^2)
    assert mu.weights[1] == pytest.approx(1 / (1 + phi**2), abs=1e-12)
    deep = parry_grid_measure(GOLDEN, perron(GOLDEN), 6)
    forbidden = [c for c in range(64) if "11" in format(c, "06b")]
    assert np.all(deep.weights[forbidden] == 0)


def test_parry_measure_of_longer_window():
    inner, _ = avoid_ball_sft(2, BallSpec(Fraction(1, 3), Fraction(1, 20)), 5)
    pd = perron(inner)
    fine = parry_grid_measure(inner, pd, 10)
    coarse = parry_grid_measure(inner, pd, 9)
    assert np.abs(coarsen(pushforward(fine, 2), 9).weights - coarse.weights).max() < 1e-12


def test_cesaro_basics():
    rng = np.random.default_rng(3)
    mu = random_measure(rng, 4, exact=True)
    assert list(cesaro_average(mu, 3, 1).weights) == list(mu.weights)
    u = GridMeasure.uniform(4)
    assert distance_to_uniform(cesaro_average(u, 3, 17)) == (0.0, 0.0)
    # against the literal definition
    acc, cur = list(mu.weights), mu
    for _ in range(4):
        cur = pushforward(cur, 3)
        acc = [x + y for x, y in zip(acc, cur.weights)]
    assert list(cesaro_average(mu, 3, 5).weights) == [x / 5 for x in acc]
    with pytest.raises(ValueError):
        cesaro_curve(mu, 3, [0])


def test_cesaro_curve_trend_golden_mean():
    nu = parry_grid_measure(GOLDEN, perron(GOLDEN), 8)
    tv = [distance_to_uniform(m)[0] for _, m in cesaro_curve(nu, 3, [64, 256, 1024, 4096])]
    assert all(b <= 1.05 * a for a, b in zip(tv, tv[1:]))


def test_csv_exports(tmp_path):
    mu = GridMeasure.point_mass(1, 2, exact=True)
    write_measure_csv(mu, tmp_path / "m.csv")
    rows = list(csv.DictReader(open(tmp_path / "m.csv")))
    assert [r["weight"] for r in rows] == ["0", "1", "0", "0"]
    write_curve_csv([(1, 0.5, 0.25)], tmp_path / "c.csv")
    assert open(tmp_path / "c.csv").read().splitlines()[1] == "1,0.5,0.25"
