"""Root-system entropy for Cartan actions and the linear-independence check.

Only type A is built in: a factor sl_n has roots e_i - e_j (i != j), each
with a configurable root-space dimension (1 for split sl_n). Cartan elements
are trace-zero vectors per factor. Arithmetic is in Fractions so integer
inputs give exact answers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .bounds import LyapunovSpectrum, ly_min_unstable_dim, marstrand_combine, prop24_bound
from .errors import RankTooLow


@dataclass(frozen=True)
class SimpleFactor:
    n: int
    multiplicity: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("sl_n needs n >= 2")
        if self.multiplicity < 1:
            raise ValueError("root multiplicity must be positive")

    @property
    def rank(self) -> int:
        return self.n - 1

    @property
    def dim(self) -> int:
        return self.n * (self.n - 1) * self.multiplicity + self.rank

    def roots(self):
        return [(i, j) for i in range(self.n) for j in range(self.n) if i != j]

    @property
    def label(self) -> str:
        return f"sl_{self.n}" + (f"(m={self.multiplicity})" if self.multiplicity != 1 else "")


@dataclass(frozen=True)
class RootSystemSpec:
    factors: tuple

    @classmethod
    def sl(cls, *ns) -> "RootSystemSpec":
        return cls(tuple(SimpleFactor(n) for n in ns))

    @classmethod
    def from_dict(cls, data) -> "RootSystemSpec":
        out = []
        for f in data["factors"]:
            if isinstance(f, dict):
                out.append(SimpleFactor(int(f["n"]), int(f.get("multiplicity", 1))))
            else:
                out.append(SimpleFactor(int(f)))
        return cls(tuple(out))

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    @property
    def rank(self) -> int:
        return sum(f.rank for f in self.factors)

    @property
    def eligible(self) -> bool:
        return all(f.rank >= 2 for f in self.factors)


@dataclass(frozen=True)
class CartanElement:
    parts: tuple  # one tuple of Fractions per factor

    def __init__(self, parts):
        if parts and not isinstance(parts[0], (tuple, list)):
            parts = (parts,)
        parts = tuple(tuple(Fraction(x) for x in p) for p in parts)
        for p in parts:
            if sum(p) != 0:
                raise ValueError(f"Cartan element {p} is not trace-zero")
        object.__setattr__(self, "parts", parts)

    def __neg__(self) -> "CartanElement":
        return CartanElement(tuple(tuple(-x for x in p) for p in self.parts))

    def scaled(self, c) -> "CartanElement":
        return CartanElement(tuple(tuple(Fraction(c) * x for x in p) for p in self.parts))

    def check(self, spec: RootSystemSpec) -> None:
        if len(self.parts) != len(spec.factors):
            raise ValueError(f"element has {len(self.parts)} factors, spec has {len(spec.factors)}")
        for p, f in zip(self.parts, spec.factors):
            if len(p) != f.n:
                raise ValueError(f"factor {f.label} needs {f.n} entries, got {len(p)}")

    def to_list(self) -> list:
        return [[str(x) for x in p] for p in self.parts]


@dataclass(frozen=True)
class CartanEntropy:
    entropy: Fraction
    dim_plus: int
    dim_minus: int
    dim_zero: int
    contributions: tuple  # (factor, (i, j), value, multiplicity) for roots with positive value
    trivial_factors: tuple  # indices of factors where the element vanishes

    @property
    def dim_total(self) -> int:
        return self.dim_plus + self.dim_minus + self.dim_zero

    def to_dict(self) -> dict:
        return {
            "entropy": str(self.entropy),
            "entropy_float": float(self.entropy),
            "dim_H_plus": self.dim_plus,
            "dim_H_minus": self.dim_minus,
            "dim_H_zero": self.dim_zero,
            "dim_total": self.dim_total,
            "trivial_factors": list(self.trivial_factors),
            "contributions": [
                {"factor": k, "root": f"e{i + 1}-e{j + 1}", "value": str(v), "multiplicity": m}
                for k, (i, j), v, m in self.contributions
            ],
        }


def root_values(spec: RootSystemSpec, t: CartanElement) -> list:
    """(factor, (i, j), t_i - t_j, multiplicity) for every root."""
    t.check(spec)
    out = []
    for k, (f, p) in enumerate(zip(spec.factors, t.parts)):
        for i, j in f.roots():
            out.append((k, (i, j), p[i] - p[j], f.multiplicity))
    return out


def cartan_entropy(spec: RootSystemSpec, t: CartanElement) -> CartanEntropy:
    """Entropy sum over roots with positive value of value * root-space dimension."""
    vals = root_values(spec, t)
    pos = [r for r in vals if r[2] > 0]
    h = sum((v * m for _, _, v, m in pos), Fraction(0))
    plus = sum(m for _, _, v, m in vals if v > 0)
    minus = sum(m for _, _, v, m in vals if v < 0)
    zero = sum(m for _, _, v, m in vals if v == 0) + spec.rank
    trivial = tuple(k for k, p in enumerate(t.parts) if all(x == 0 for x in p))
    return CartanEntropy(h, plus, minus, zero, tuple(pos), trivial)


@dataclass(frozen=True)
class FactorCheck:
    factor: int
    label: str
    projections: tuple  # 2 x n matrix of the two elements in this factor
    independent: bool
    witness: tuple | None  # (i, j, minor) of a nonzero 2x2 minor

    def to_dict(self) -> dict:
        return {
            "factor": self.factor,
            "label": self.label,
            "projections": [[str(x) for x in row] for row in self.projections],
            "independent": self.independent,
            "witness": None if self.witness is None else [self.witness[0], self.witness[1], str(self.witness[2])],
        }


@dataclass(frozen=True)
class HypothesisReport:
    factors: tuple
    passed: bool
    failing: tuple

    def to_dict(self) -> dict:
        return {"passed": self.passed, "failing_factors": list(self.failing), "factors": [f.to_dict() for f in self.factors]}


def _require_rank(spec: RootSystemSpec) -> None:
    low = [f.label for f in spec.factors if f.rank < 2]
    if low:
        raise RankTooLow(f"factors {low} have real rank < 2")


def check_theorem14_hypotheses(spec: RootSystemSpec, a1: CartanElement, a2: CartanElement) -> HypothesisReport:
    """Are a1 and a2 linearly independent in every simple factor?"""
    _require_rank(spec)
    a1.check(spec)
    a2.check(spec)
    checks = []
    for k, (f, p, q) in enumerate(zip(spec.factors, a1.parts, a2.parts)):
        witness = None
        for i in range(f.n):
            for j in range(i + 1, f.n):
                minor = p[i] * q[j] - p[j] * q[i]
                if minor != 0:
                    witness = (i, j, minor)
                    break
            if witness:
                break
        checks.append(FactorCheck(k, f.label, (p, q), witness is not None, witness))
    failing = tuple(c.factor for c in checks if not c.independent)
    return HypothesisReport(tuple(checks), not failing, failing)


@dataclass(frozen=True)
class CartanBound:
    bound: float
    dim_G: int
    dim_plus: int
    dim_minus: int
    dim_zero: int
    delta_u: float
    delta_s: float
    assumed_dim: float
    valid: bool
    flags: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "bound": self.bound,
            "dim_G": self.dim_G,
            "dim_H_plus": self.dim_plus,
            "dim_H_minus": self.dim_minus,
            "dim_H_zero": self.dim_zero,
            "delta_u": self.delta_u,
            "delta_s": self.delta_s,
            "assumed_dim_E_q": self.assumed_dim,
            "valid": self.valid,
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _root_spectrum(ent: CartanEntropy):
    pairs = [(float(v), m) for _, _, v, m in ent.contributions]
    return LyapunovSpectrum.from_pairs(pairs) if pairs else None


def cartan_dim_bound(spec: RootSystemSpec, a1: CartanElement, assumed_dim: float | None = None) -> CartanBound:
    """Lower bound dim H^0 + delta_u + delta_s for the Cartan flow of ``a1``.

    With ``assumed_dim`` omitted (or equal to dim G) this is the limit
    dim H^+ + dim H^- + dim H^0 = dim G.
    """
    _require_rank(spec)
    ent = cartan_entropy(spec, a1)
    G = spec.dim
    flags = []
    if ent.trivial_factors:
        flags.append(f"a1 is trivial in factors {list(ent.trivial_factors)}; it must act nontrivially in every factor")
    if ent.dim_plus == 0:
        flags.append("a1 = 0: everything is neutral, no partially hyperbolic action")
    dim_E = float(G) if assumed_dim is None else float(assumed_dim)
    spec_u = _root_spectrum(ent)
    spec_s = _root_spectrum(cartan_entropy(spec, -a1))
    if spec_u is None:
        du = ds = 0.0
    elif dim_E >= G:
        du, ds = float(ent.dim_plus), float(ent.dim_minus)
    else:
        h = float(ent.entropy)
        hu = prop24_bound(h, G, dim_E, spec_u.exponents[0][0])
        hs = prop24_bound(h, G, dim_E, spec_s.exponents[0][0])
        du = ly_min_unstable_dim(spec_u, min(hu, spec_u.max_entropy)).delta_u
        ds = ly_min_unstable_dim(spec_s, min(hs, spec_s.max_entropy)).delta_u
    bound = marstrand_combine(du, ds) + ent.dim_zero
    return CartanBound(bound, G, ent.dim_plus, ent.dim_minus, ent.dim_zero, du, ds, dim_E, not flags, tuple(flags))
