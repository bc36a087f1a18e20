"""Commuting pairs of toral maps: dependence search, partner corpora, factor scans."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import sympy

from . import _exact
from .errors import DimensionMismatch, ReducibleSeed
from .spectral import ToralMap, char_poly, entropy_report, is_irreducible

DEFAULT_TWIST_CAP = 12


@dataclass(frozen=True)
class CommutingPair:
    t_map: ToralMap
    s_map: ToralMap
    verified_commuting: bool = False

    @classmethod
    def build(cls, t_map: ToralMap, s_map: ToralMap) -> "CommutingPair":
        return cls(t_map, s_map, commutes(t_map, s_map))

    def to_dict(self) -> dict:
        return {
            "T": [list(r) for r in self.t_map.entries],
            "S": [list(r) for r in self.s_map.entries],
            "verified_commuting": self.verified_commuting,
        }


@dataclass(frozen=True)
class DependenceCertificate:
    relation: tuple | None
    search_bound: int
    log_ratio_witness: str | None = None

    def to_dict(self) -> dict:
        return {
            "relation": list(self.relation) if self.relation else None,
            "search_bound": self.search_bound,
            "log_ratio_witness": self.log_ratio_witness,
        }


@dataclass(frozen=True)
class BlockVerdict:
    basis: tuple  # integer column vectors spanning the block, as rows
    t_poly: tuple
    s_poly: tuple
    status: str  # "dependent-on-block" | "independent-up-to-bound"
    relation: tuple | None = None
    twist_order: int | None = None


@dataclass(frozen=True)
class FactorScanReport:
    blocks: tuple
    overall: str  # "rank-one factor found" | "none found up to bound"
    bound: int
    twist_cap: int
    notes: tuple = field(default=())

    @property
    def verdicts(self) -> tuple:
        return tuple(b.status for b in self.blocks)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "bound": self.bound,
            "twist_cap": self.twist_cap,
            "notes": list(self.notes),
            "blocks": [
                {
                    "basis": [list(map(int, v)) for v in b.basis],
                    "T_char_poly": list(b.t_poly),
                    "S_char_poly": list(b.s_poly),
                    "status": b.status,
                    "relation": list(b.relation) if b.relation else None,
                    "twist_order": b.twist_order,
                }
                for b in self.blocks
            ],
        }


def commutes(a: ToralMap, b: ToralMap) -> bool:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions {a.dim} and {b.dim} differ")
    return _exact.mat_mul(a.entries, b.entries) == _exact.mat_mul(b.entries, a.entries)


def _power_table(m, max_exp: int, negative: bool) -> dict:
    """exponent -> matrix power, exact (ints or Fractions)."""
    n = len(m)
    table = {0: _exact.identity(n)}
    cur = table[0]
    for k in range(1, max_exp + 1):
        cur = _exact.mat_mul(cur, m)
        table[k] = cur
    if negative:
        inv = _exact.inverse(m)
        cur = table[0]
        for k in range(1, max_exp + 1):
            cur = _exact.mat_mul(cur, inv)
            table[-k] = cur
    return table


def _canonical(t: int, s: int) -> tuple:
    if t < 0 or (t == 0 and s < 0):
        return (-t, -s)
    return (t, s)


def _relations(a, b, max_exp: int, invertible: bool) -> list[tuple]:
    """Every (t, s) != (0, 0), max(|t|,|s|) <= max_exp, with a^t = b^s; sign-normalized."""
    ta = _power_table(a, max_exp, invertible)
    tb = _power_table(b, max_exp, invertible)
    index: dict = {}
    for s, mat in tb.items():
        index.setdefault(mat, []).append(s)
    found = set()
    for t, mat in ta.items():
        for s in index.get(mat, ()):
            if (t, s) != (0, 0):
                found.add(_canonical(t, s))
    return sorted(found)


def multiplicative_dependence(pair: CommutingPair, bound: int, with_entropy: bool = True) -> DependenceCertificate:
    """Bounded search for T^t = S^s; returns the lexicographically least relation.

    Relations are sign-normalized (t > 0, or t == 0 and s > 0); negative exponents
    are only searched when both maps are automorphisms.
    """
    if not pair.verified_commuting:
        raise ValueError("pair is not verified commuting")
    if pair.t_map.det == 0 or pair.s_map.det == 0:
        raise ValueError("multiplicative_dependence needs nonsingular maps")
    invertible = pair.t_map.is_invertible and pair.s_map.is_invertible
    rels = _relations(pair.t_map.entries, pair.s_map.entries, bound, invertible)
    relation = rels[0] if rels else None
    note = None
    if with_entropy:
        note = _entropy_note(pair, relation)
    return DependenceCertificate(relation, bound, note)


def _entropy_note(pair: CommutingPair, relation) -> str | None:
    try:
        rt = entropy_report(pair.t_map)
        rs = entropy_report(pair.s_map)
    except Exception:  # spectral data not certifiable: no note
        return None
    if relation is not None:
        t, s = relation
        gap = abs(t * rt.h_top - s * rs.h_top)
        tol = abs(t) * rt.h_top_error + abs(s) * rs.h_top_error + 1e-12
        return f"necessary condition t*h(T) = s*h(S): |gap| = {gap:.3e} <= {tol:.3e}"
    if rs.h_top > 0 and rt.h_top > 0:
        ratio = rt.h_top / rs.h_top
        frac = Fraction(ratio).limit_denominator(10**6)
        return (
            f"entropy ratio h(T)/h(S) = {ratio:.15g}; a relation (t, s) forces ratio = s/t, "
            f"nearest rational with denominator <= 10^6 is {frac}"
        )
    return None


def companion_partners(seed: ToralMap, coeff_bound: int):
    """Yield (coefficients, p(seed)) for all p of degree < d with coefficients in range."""
    d = seed.dim
    powers = [_exact.identity(d)]
    for _ in range(1, d):
        powers.append(_exact.mat_mul(powers[-1], seed.entries))
    rng = range(-coeff_bound, coeff_bound + 1)
    for coeffs in itertools.product(rng, repeat=d):
        mat = _exact.mat_scale(0, powers[0])
        for c, p in zip(coeffs, powers):
            if c:
                mat = _exact.mat_add(mat, _exact.mat_scale(c, p))
        yield coeffs, mat


def find_commuting_partners(seed: ToralMap, coeff_bound: int) -> list[ToralMap]:
    """All unimodular p(seed), deg p < d, |coefficients| <= coeff_bound, minus +-seed^k for |k| <= 2."""
    if not is_irreducible(char_poly(seed)):
        raise ReducibleSeed(f"characteristic polynomial {char_poly(seed)} factors over Z")
    excluded = set()
    for k in range(-2, 3):
        if k < 0 and not seed.is_invertible:
            continue
        pk = seed.power(k).entries
        excluded.add(pk)
        excluded.add(_exact.mat_scale(-1, pk))
    out = []
    seen = set()
    for _, mat in companion_partners(seed, coeff_bound):
        if mat in excluded or mat in seen:
            continue
        if abs(_exact.determinant(mat)) != 1:
            continue
        seen.add(mat)
        cand = ToralMap(mat)
        assert commutes(cand, seed)
        out.append(cand)
    return out


# -- rational invariant subspaces -------------------------------------------

def _restrict(op: sympy.Matrix, basis: sympy.Matrix) -> sympy.Matrix:
    """Matrix of op on span(basis) (columns), assuming the span is invariant."""
    gram = basis.T * basis
    return gram.inv() * basis.T * op * basis


def _split(op: sympy.Matrix, basis: sympy.Matrix) -> list[sympy.Matrix]:
    """Primary decomposition of span(basis) under op (a rational matrix)."""
    local = _restrict(op, basis)
    x = sympy.Symbol("x")
    _, factors = local.charpoly(x).factor_list()
    if len(factors) <= 1:
        return [basis]
    parts = []
    for poly, e in factors:
        mat = sympy.zeros(*local.shape)
        for c in poly.all_coeffs():
            mat = mat * local + c * sympy.eye(local.shape[0])
        kernel = (mat ** int(e)).nullspace()
        cols = [basis * v for v in kernel]
        parts.append(_integral_basis(sympy.Matrix.hstack(*cols)))
    return parts


def _integral_basis(b: sympy.Matrix) -> sympy.Matrix:
    cols = []
    for j in range(b.shape[1]):
        col = b[:, j]
        den = sympy.ilcm(*[sympy.fraction(v)[1] for v in col]) if col else 1
        ints = [int(v * den) for v in col]
        g = _exact.content_gcd(ints) or 1
        cols.append(sympy.Matrix([v // g for v in ints]))
    return sympy.Matrix.hstack(*cols)


def invariant_blocks(pair: CommutingPair) -> list[sympy.Matrix]:
    """Jointly invariant rational subspaces from primary decompositions of T, S and combinations."""
    t = sympy.Matrix(pair.t_map.entries)
    s = sympy.Matrix(pair.s_map.entries)
    ops = [t, s, t + s, t - s, t + 2 * s]
    blocks = [sympy.eye(pair.t_map.dim)]
    for op in ops:
        nxt = []
        for b in blocks:
            nxt.extend(_split(op, b))
        blocks = nxt
    return blocks


def _to_exact(m: sympy.Matrix):
    return tuple(
        tuple(int(v) if v.is_Integer else Fraction(int(v.p), int(v.q)) for v in m.row(i))
        for i in range(m.shape[0])
    )


def rank_one_factor_scan(pair: CommutingPair, bound: int, twist_cap: int = DEFAULT_TWIST_CAP) -> FactorScanReport:
    """Per-block bounded search for T^t = zeta S^s, zeta of finite order <= twist_cap.

    "none found up to bound" is inconclusive by design: exact detection would
    need unit-group computations in number fields.
    """
    if not pair.verified_commuting:
        raise ValueError("pair is not verified commuting")
    t = sympy.Matrix(pair.t_map.entries)
    s = sympy.Matrix(pair.s_map.entries)
    verdicts = []
    for basis in invariant_blocks(pair):
        tb = _restrict(t, basis)
        sb = _restrict(s, basis)
        x = sympy.Symbol("x")
        t_poly = tuple(int(c) for c in tb.charpoly(x).all_coeffs())
        s_poly = tuple(int(c) for c in sb.charpoly(x).all_coeffs())
        relation, order = _twisted_relation(_to_exact(tb), _to_exact(sb), bound, twist_cap)
        status = "dependent-on-block" if relation else "independent-up-to-bound"
        vectors = tuple(tuple(int(v) for v in basis[:, j]) for j in range(basis.shape[1]))
        verdicts.append(BlockVerdict(vectors, t_poly, s_poly, status, relation, order))
    found = any(v.relation for v in verdicts)
    notes = (
        f"finite-order twists searched up to order {twist_cap}; "
        "finite-index phenomena beyond this cap are not detected",
    )
    return FactorScanReport(
        tuple(verdicts),
        "rank-one factor found" if found else "none found up to bound",
        bound,
        twist_cap,
        notes,
    )


def _twisted_relation(tb, sb, bound: int, cap: int):
    det_t = _exact.determinant(tb)
    det_s = _exact.determinant(sb)
    if det_t == 0 or det_s == 0:
        return None, None
    invertible = abs(det_t) == 1 and abs(det_s) == 1
    best = None
    for tp, sp in _relations(tb, sb, bound * cap, invertible):
        g = math.gcd(tp, sp)
        for k in range(1, cap + 1):
            if g % k:
                continue
            t, s = tp // k, sp // k
            if max(abs(t), abs(s)) > bound:
                continue
            if best is None or (t, s) < best:
                best = (t, s)
    if best is None:
        return None, None
    t, s = best
    lhs = _signed_power(tb, t)
    rhs = _signed_power(sb, s)
    order = None
    a, b = lhs, rhs
    for k in range(1, cap + 1):
        if a == b:
            order = k
            break
        a = _exact.mat_mul(a, lhs)
        b = _exact.mat_mul(b, rhs)
    return best, order


def _signed_power(m, n: int):
    if n < 0:
        return _exact.mat_pow(_exact.inverse(m), -n)
    return _exact.mat_pow(m, n)


def corpus_lines(pairs, bound: int = 20) -> list[str]:
    """JSON lines (one pair each) with hyperbolicity, independence and scan flags."""
    lines = []
    for pair in pairs:
        rec = pair.to_dict()
        try:
            hyp = entropy_report(pair.t_map).hyperbolic and entropy_report(pair.s_map).hyperbolic
        except Exception:
            hyp = False
        cert = multiplicative_dependence(pair, bound, with_entropy=False)
        scan = rank_one_factor_scan(pair, bound)
        rec.update(
            hyperbolic_both=hyp,
            independent_up_to_bound=cert.relation is None,
            relation=list(cert.relation) if cert.relation else None,
            rank_one_scan=scan.overall,
            bound=bound,
        )
        lines.append(json.dumps(rec, sort_keys=True))
    return lines
