"""Entropy-to-dimension calculators.

The chain runs from an entropy lower bound for a closed invariant set, through
the cheapest Ledrappier-Young allocation of that entropy to unstable
directions, to a slicing combination of the unstable and stable sides.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EntropyOutOfRange, InvalidGeometry
from .spectral import EntropyReport

# relative slack for "this entropy is the full entropy" (absorbs log rounding)
SATURATION_RTOL = 1e-12


@dataclass(frozen=True)
class LyapunovSpectrum:
    exponents: tuple  # ((kappa_i, dim E_i), ...) strictly decreasing kappa_i > 0

    def __post_init__(self):
        ks = [k for k, _ in self.exponents]
        if any(k <= 0 for k in ks):
            raise ValueError("exponents must be positive")
        if any(a <= b for a, b in zip(ks, ks[1:])):
            raise ValueError("exponents must be strictly decreasing")
        if any(int(m) != m or m < 1 for _, m in self.exponents):
            raise ValueError("multiplicities must be positive integers")

    @classmethod
    def from_pairs(cls, pairs) -> "LyapunovSpectrum":
        """Sort, and merge equal exponents by adding multiplicities."""
        merged: dict = {}
        for k, m in pairs:
            merged[float(k)] = merged.get(float(k), 0) + int(m)
        return cls(tuple(sorted(merged.items(), reverse=True)))

    @classmethod
    def from_logs(cls, logs) -> "LyapunovSpectrum":
        """From (log, error, multiplicity) triples, grouping logs equal within error."""
        groups: list = []
        for v, e, m in sorted(logs, key=lambda t: -t[0]):
            if groups and abs(groups[-1][0] - v) <= groups[-1][1] + e:
                groups[-1][2] += m
            else:
                groups.append([v, e, m])
        return cls(tuple((v, m) for v, _, m in groups))

    @property
    def total_unstable_dim(self) -> int:
        return sum(m for _, m in self.exponents)

    @property
    def max_entropy(self) -> float:
        return float(sum(k * m for k, m in self.exponents))


@dataclass(frozen=True)
class LYAllocation:
    gammas: tuple
    delta_u: float
    achieved_entropy: float

    def to_dict(self) -> dict:
        return {"gammas": list(self.gammas), "delta_u": self.delta_u, "achieved_entropy": self.achieved_entropy}


@dataclass(frozen=True)
class BoundReport:
    d: int
    dim_F: float
    entropy_bound: float
    delta_u_bound: float
    delta_s_bound: float | None
    neutral_dim: float
    combined: float
    stable_entropy_bound: float | None = None
    provenance: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "q_geometry": {"d": self.d, "dim_E_q": self.dim_F, "deficit": self.d - self.dim_F},
            "entropy_bound": self.entropy_bound,
            "stable_entropy_bound": self.stable_entropy_bound,
            "delta_u_bound": self.delta_u_bound,
            "delta_s_bound": self.delta_s_bound,
            "neutral_dim": self.neutral_dim,
            "combined": self.combined,
            "provenance": list(self.provenance),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def prop24_bound(h_top: float, d: int, dim_F: float, log_lambda1: float) -> float:
    """Entropy lower bound max(0, h - (d - dim F) log|lambda_1|) for a closed invariant F."""
    if dim_F > d:
        raise InvalidGeometry(f"dim F = {dim_F} exceeds ambient dimension {d}")
    if dim_F < 0:
        raise InvalidGeometry("dim F must be nonnegative")
    if dim_F == d:
        return float(h_top)
    return max(0.0, h_top - (d - dim_F) * log_lambda1)


def ly_min_unstable_dim(spectrum: LyapunovSpectrum, entropy: float) -> LYAllocation:
    """Smallest sum of partial dimensions carrying ``entropy``.

    Minimise sum(gamma_i) subject to sum(kappa_i gamma_i) = entropy and
    0 <= gamma_i <= dim E_i. Filling the largest exponents first is optimal
    because each unit of gamma buys kappa_i units of entropy.
    """
    total = spectrum.max_entropy
    slack = SATURATION_RTOL * max(total, 1.0)
    if entropy < -slack or entropy > total + slack:
        raise EntropyOutOfRange(f"entropy {entropy} outside [0, {total}]")
    if entropy >= total - slack:
        gammas = tuple(float(m) for _, m in spectrum.exponents)
        return LYAllocation(gammas, float(spectrum.total_unstable_dim), total)
    remaining = max(0.0, entropy)
    gammas = []
    for k, m in spectrum.exponents:
        g = min(float(m), float(remaining / k))
        gammas.append(g)
        remaining -= g * k
        remaining = max(0.0, remaining)
    return LYAllocation(tuple(gammas), float(sum(gammas)), float(sum(k * g for (k, _), g in zip(spectrum.exponents, gammas))))


def marstrand_combine(dim_base: float, dim_fiber_inf: float) -> float:
    if dim_base < 0 or dim_fiber_inf < 0:
        raise ValueError("dimensions must be nonnegative")
    return dim_base + dim_fiber_inf


def _backward_report(report: EntropyReport) -> tuple:
    """Expanding logs of T^-1: the contracting logs of T, negated."""
    return tuple((-v, e, m) for v, e, m in sorted(report.contracting, key=lambda t: t[0]))


def predicted_dim_bound(report: EntropyReport, dim_F: float, invertible: bool,
                        neutral_dim: float | None = None) -> BoundReport:
    """Lower bound on the dimension of dense-under-S points inside the avoid sets.

    ``report`` describes T; for automorphisms the T^-1 side reuses its
    contracting spectrum. Endomorphisms bound by the unstable side only.
    """
    d = report.dim
    if not report.hyperbolic and neutral_dim is None:
        raise InvalidGeometry("T is not hyperbolic; pass neutral_dim to include the centre directions")
    if report.expanding_dim == 0:
        raise InvalidGeometry("T has no expanding directions")
    prov = []
    h = report.h_top
    h_u = prop24_bound(h, d, dim_F, report.log_lambda1)
    prov.append(f"h(T|E(q)) >= h(T) - (d - dim E(q)) log|lambda_1(T)| = {h_u!r}")
    spec_u = LyapunovSpectrum.from_logs(report.expanding)
    alloc_u = ly_min_unstable_dim(spec_u, min(h_u, spec_u.max_entropy))
    prov.append(f"delta_u = min sum gamma_i s.t. sum kappa_i gamma_i = h  -> {alloc_u.delta_u!r}")
    delta_s = None
    h_s = None
    if invertible and report.contracting:
        back = _backward_report(report)
        h_s = prop24_bound(h, d, dim_F, back[0][0])
        prov.append(f"h(T^-1|E(q)) >= h(T^-1) - (d - dim E(q)) log|lambda_1(T^-1)| = {h_s!r}")
        spec_s = LyapunovSpectrum.from_logs(back)
        alloc_s = ly_min_unstable_dim(spec_s, min(h_s, spec_s.max_entropy))
        delta_s = alloc_s.delta_u
        prov.append(f"delta_s = same allocation for T^-1 -> {delta_s!r}")
    elif not invertible:
        prov.append("stable side omitted: T is not invertible, bound is by dim W^u only")
    neutral = float(neutral_dim or 0.0)
    combined = marstrand_combine(alloc_u.delta_u, delta_s or 0.0) + neutral
    prov.append(f"dim >= dim(base) + inf dim(fibre) = delta_u + delta_s (+ neutral {neutral!r}) = {combined!r}")
    return BoundReport(d, float(dim_F), h_u, alloc_u.delta_u, delta_s, neutral, combined, h_s, tuple(prov))


# -- box counting ------------------------------------------------------------

def box_counts(cells: np.ndarray, depth: int) -> np.ndarray:
    """Occupied dyadic boxes at levels 0..depth for points given as depth-``depth`` cell coordinates.

    ``cells`` has shape (n, dim) with integer coordinates in [0, 2**depth).
    """
    cells = np.asarray(cells, dtype=np.int64)
    if cells.ndim == 1:
        cells = cells[:, None]
    dim = cells.shape[1]
    counts = []
    for level in range(depth + 1):
        c = cells >> (depth - level)
        key = np.zeros(len(c), dtype=np.int64)
        for j in range(dim):
            key = key * (1 << level) + c[:, j]
        counts.append(len(np.unique(key)))
    return np.array(counts)


def box_dimension(cells: np.ndarray, depth: int, fit_from: int | None = None) -> float:
    """Least-squares slope of log N(2^-k) against k log 2 over levels fit_from..depth."""
    counts = box_counts(cells, depth)
    lo = depth // 2 if fit_from is None else fit_from
    k = np.arange(lo, depth + 1)
    slope = np.polyfit(k * np.log(2.0), np.log(counts[lo:]), 1)[0]
    return float(slope)


def product_cells(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All pairs (x, y) of two 1-d cell sets as an (n*m, 2) array."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    return np.stack([np.repeat(a, len(b)), np.tile(b, len(a))], axis=1)
