"""Grid measures on T^d, exact push-forward under integer maps, Cesaro averages.

A GridMeasure at depth m puts a weight on each cell of the b-adic partition of
T^d into b**(m d) boxes, read as uniform density inside the cell. The image of
a cell under an integer matrix M is a parallelepiped M c / B + M [0, 1/B]^d,
whose overlap with the grid does not depend on c because M c is a lattice
point. So one exact pattern of (offset, fraction) pairs describes the whole
push-forward.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import IncompatibleGrid
from .spectral import ToralMap
from .symbolic import PerronData, SftSpec, admissible_words

MASS_TOL = 1e-12


@dataclass(frozen=True)
class GridMeasure:
    depth: int
    dim: int
    weights: np.ndarray  # float64, or object dtype holding Fractions
    radix: int = 2

    def __post_init__(self):
        n = self.side ** self.dim
        if self.weights.shape != (n,):
            raise ValueError(f"expected {n} weights, got shape {self.weights.shape}")
        if self.exact:
            if sum(self.weights) != 1 or any(w < 0 for w in self.weights):
                raise ValueError("exact weights must be nonnegative and sum to 1")
        else:
            if np.any(self.weights < 0) or abs(float(self.weights.sum()) - 1.0) > MASS_TOL:
                raise ValueError("weights must be nonnegative and sum to 1")

    @property
    def side(self) -> int:
        return self.radix ** self.depth

    @property
    def n_cells(self) -> int:
        return self.side ** self.dim

    @property
    def exact(self) -> bool:
        return self.weights.dtype == object

    @classmethod
    def uniform(cls, depth: int, dim: int = 1, radix: int = 2, exact: bool = False) -> "GridMeasure":
        n = (radix ** depth) ** dim
        if exact:
            return cls(depth, dim, np.array([Fraction(1, n)] * n, dtype=object), radix)
        return cls(depth, dim, np.full(n, 1.0 / n), radix)

    @classmethod
    def point_mass(cls, cell: int, depth: int, dim: int = 1, radix: int = 2, exact: bool = False) -> "GridMeasure":
        n = (radix ** depth) ** dim
        if exact:
            w = np.array([Fraction(0)] * n, dtype=object)
            w[cell] = Fraction(1)
        else:
            w = np.zeros(n)
            w[cell] = 1.0
        return cls(depth, dim, w, radix)

    @classmethod
    def from_cells(cls, cells: np.ndarray, depth: int, dim: int = 1, radix: int = 2) -> "GridMeasure":
        """Empirical measure of a list of cell indices (e.g. an orbit trace)."""
        n = (radix ** depth) ** dim
        counts = np.bincount(np.asarray(cells, dtype=np.int64), minlength=n).astype(float)
        return cls(depth, dim, counts / counts.sum(), radix)

    def coords(self) -> np.ndarray:
        """(n_cells, dim) integer coordinates; the first coordinate is least significant."""
        idx = np.arange(self.n_cells, dtype=np.int64)
        return np.stack([(idx // self.side ** k) % self.side for k in range(self.dim)], axis=1)

    def total_mass(self):
        return sum(self.weights) if self.exact else float(self.weights.sum())

    def to_float(self) -> "GridMeasure":
        if not self.exact:
            return self
        w = np.array([float(x) for x in self.weights])
        return GridMeasure(self.depth, self.dim, w / w.sum(), self.radix)


def _clip(poly, axis: int, bound, keep_above: bool):
    """Sutherland-Hodgman clip of a convex polygon against x_axis >= bound (or <=)."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        pin = p[axis] >= bound if keep_above else p[axis] <= bound
        qin = q[axis] >= bound if keep_above else q[axis] <= bound
        if pin:
            out.append(p)
        if pin != qin:
            t = Fraction(bound - p[axis]) / (q[axis] - p[axis])
            out.append(tuple(p[k] + t * (q[k] - p[k]) for k in range(2)))
    return out


def _area(poly) -> Fraction:
    s = Fraction(0)
    for i in range(len(poly)):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % len(poly)]
        s += x0 * y1 - x1 * y0
    return abs(s) / 2


@lru_cache(maxsize=64)
def overlap_pattern(entries: tuple) -> tuple:
    """Exact (offset, fraction) pairs: where the image of the unit cell lands.

    Fractions sum to 1. Offsets are relative to the image of the cell's corner.
    """
    d = len(entries)
    if d == 1:
        a = int(entries[0][0])
        if a == 0:
            raise IncompatibleGrid("the zero map has no cell push-forward")
        lo = a if a < 0 else 0
        return tuple(((lo + k,), Fraction(1, abs(a))) for k in range(abs(a)))
    if d != 2:
        raise IncompatibleGrid(f"exact overlap patterns are implemented for d <= 2, got d = {d}")
    (a, b), (c, e) = entries
    det = a * e - b * c
    if det == 0:
        raise IncompatibleGrid("singular map")
    verts = [(0, 0), (a, c), (a + b, c + e), (b, e)]
    xs = [v[0] for v in verts]
    ys = [v[1] for v in verts]
    pattern = []
    for i in range(min(xs), max(xs)):
        for j in range(min(ys), max(ys)):
            poly = [tuple(Fraction(x) for x in v) for v in verts]
            for axis, lo, hi in ((0, i, i + 1), (1, j, j + 1)):
                poly = _clip(poly, axis, lo, True)
                if poly:
                    poly = _clip(poly, axis, hi, False)
                if not poly:
                    break
            if len(poly) >= 3:
                area = _area(poly)
                if area:
                    pattern.append(((i, j), area / abs(det)))
    assert sum(f for _, f in pattern) == 1
    return tuple(pattern)


def _as_map(m) -> ToralMap:
    if isinstance(m, ToralMap):
        return m
    return ToralMap.scalar(int(m))


def pushforward(measure: GridMeasure, m) -> GridMeasure:
    """Exact push-forward of a grid measure under a toral map (or an int b for x -> b x)."""
    tm = _as_map(m)
    if tm.dim != measure.dim:
        raise IncompatibleGrid(f"map dimension {tm.dim} != measure dimension {measure.dim}")
    pattern = overlap_pattern(tm.entries)
    B = measure.side
    coords = measure.coords()
    img = coords @ np.array(tm.entries, dtype=np.int64).T
    place = B ** np.arange(measure.dim, dtype=np.int64)
    w = measure.weights
    if measure.exact:
        new = np.array([Fraction(0)] * measure.n_cells, dtype=object)
    else:
        new = np.zeros(measure.n_cells)
    for off, frac in pattern:
        tgt = ((img + np.array(off, dtype=np.int64)) % B) @ place
        if measure.exact:
            np.add.at(new, tgt, w * frac)
        else:
            new += np.bincount(tgt, weights=w * float(frac), minlength=measure.n_cells)
    return GridMeasure(measure.depth, measure.dim, new, measure.radix)


def coarsen(measure: GridMeasure, depth: int) -> GridMeasure:
    """Sum weights onto the coarser partition at ``depth``."""
    if depth > measure.depth:
        raise IncompatibleGrid("cannot refine by coarsening")
    drop = measure.radix ** (measure.depth - depth)
    side = measure.radix ** depth
    coords = measure.coords() // drop
    tgt = coords @ (side ** np.arange(measure.dim, dtype=np.int64))
    n = side ** measure.dim
    if measure.exact:
        new = np.array([Fraction(0)] * n, dtype=object)
        np.add.at(new, tgt, measure.weights)
    else:
        new = np.bincount(tgt, weights=measure.weights, minlength=n)
    return GridMeasure(depth, measure.dim, new, measure.radix)


def cesaro_average(initial: GridMeasure, m, N: int) -> GridMeasure:
    """mu_N = (1/N) sum_{n<N} S_*^n nu."""
    return cesaro_curve(initial, m, [N])[0][1]


def cesaro_curve(initial: GridMeasure, m, checkpoints) -> list:
    """[(N, mu_N)] for each N in ``checkpoints``, from a single pass."""
    checkpoints = sorted(set(int(n) for n in checkpoints))
    if not checkpoints or checkpoints[0] < 1:
        raise ValueError("checkpoints must be positive")
    out = []
    current = initial
    acc = initial.weights.copy()
    targets = iter(checkpoints)
    nxt = next(targets)
    for n in range(1, checkpoints[-1] + 1):
        if n == nxt:
            w = acc / n if not initial.exact else np.array([x / n for x in acc], dtype=object)
            if not initial.exact:
                w = w / w.sum()
            out.append((n, GridMeasure(initial.depth, initial.dim, w, initial.radix)))
            nxt = next(targets, None)
            if nxt is None:
                break
        current = pushforward(current, m)
        acc = acc + current.weights
    return out


def distance_to_uniform(measure: GridMeasure) -> tuple[float, float]:
    """(total variation, largest single-cell deviation) from the uniform grid measure."""
    if measure.exact:
        u = Fraction(1, measure.n_cells)
        dev = [abs(w - u) for w in measure.weights]
        return float(sum(dev) / 2), float(max(dev))
    dev = np.abs(measure.weights - 1.0 / measure.n_cells)
    return float(0.5 * dev.sum()), float(dev.max())


def parry_grid_measure(spec: SftSpec, data: PerronData, depth: int) -> GridMeasure:
    """Parry measure of the principal class, as cylinder weights at ``depth``.

    For a word w of length n >= L-1 with first state s and last state t,
    mu[w] = u_s v_t / rho**(n - L + 1), with u.v = 1.
    """
    b, L = spec.base, spec.window
    k = L - 1
    if depth < k:
        fine = parry_grid_measure(spec, data, k)
        return coarsen(fine, depth)
    words = admissible_words(spec, depth)
    pos = -np.ones(b ** k, dtype=np.int64)
    pos[data.states[data.component]] = np.arange(len(data.component))
    first = pos[words // b ** (depth - k)]
    last = pos[words % b ** k]
    ok = (first >= 0) & (last >= 0)
    w = np.zeros(b ** depth)
    w[words[ok]] = data.left_vector[first[ok]] * data.right_vector[last[ok]] / data.spectral_radius ** (depth - k)
    total = w.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"Parry cylinder weights sum to {total}")
    return GridMeasure(depth, 1, w / total, b)


def write_measure_csv(measure: GridMeasure, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell", "weight"])
        for i, x in enumerate(measure.weights):
            w.writerow([i, repr(float(x)) if not measure.exact else str(x)])


def write_curve_csv(rows, path) -> None:
    """rows: iterables of (N, tv, max_dev)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "total_variation", "max_cell_deviation"])
        for n, tv, md in rows:
            w.writerow([n, repr(tv), repr(md)])


def pattern_offsets(m) -> list:
    """Readable form of the overlap pattern, for reports."""
    return [(list(off), str(f)) for off, f in overlap_pattern(_as_map(m).entries)]

