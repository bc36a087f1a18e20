"""Certified spectral analysis of integer matrices acting on T^d.

Eigenvalues come from the characteristic polynomial, never from a floating
eigensolver. Each irreducible factor over Z is solved with mpmath, the
approximations are snapped to Gaussian rationals, and inclusion disks of radius
``deg * |W_i|`` (W_i the Weierstrass correction) are evaluated in exact
arithmetic. Pairwise disjoint disks each hold exactly one root
(Braess-Hadeler inclusion theorem), so every reported radius is a proof.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import sympy

from . import _exact
from .errors import NeutralSpectrum, PrecisionExhausted

EXPANDING = "expanding"
CONTRACTING = "contracting"
NEUTRAL = "neutral"
UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class ToralMap:
    """An integer matrix acting on the torus R^d / Z^d."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in row) for row in self.entries)
        if not rows or any(len(r) != len(rows) for r in rows):
            raise ValueError("ToralMap needs a non-empty square integer matrix")
        for row, orig in zip(rows, self.entries):
            for x, y in zip(row, orig):
                if x != y:
                    raise ValueError(f"non-integer entry {y!r}")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def scalar(cls, b: int, dim: int = 1) -> "ToralMap":
        """The map x -> b*x on T^dim."""
        return cls(_exact.mat_scale(b, _exact.identity(dim)))

    @classmethod
    def companion(cls, coeffs) -> "ToralMap":
        """Companion matrix of a monic polynomial given leading-coefficient first.

        Ones sit on the subdiagonal and the last column holds ``-c_0, ..., -c_{d-1}``.
        """
        coeffs = [int(c) for c in coeffs]
        if coeffs[0] != 1:
            raise ValueError("companion() needs a monic polynomial")
        d = len(coeffs) - 1
        low_first = coeffs[::-1][:-1]
        rows = [[0] * d for _ in range(d)]
        for i in range(1, d):
            rows[i][i - 1] = 1
        for i in range(d):
            rows[i][d - 1] = -low_first[i]
        return cls(rows)

    @classmethod
    def from_json(cls, text: str) -> "ToralMap":
        return cls(json.loads(text))

    def to_json(self) -> str:
        return json.dumps([list(r) for r in self.entries])

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def det(self) -> int:
        return _exact.determinant(self.entries)

    @property
    def kind(self) -> str:
        det = self.det
        if det in (1, -1):
            return "automorphism"
        return "epimorphism" if det != 0 else "singular"

    @property
    def is_invertible(self) -> bool:
        return self.det in (1, -1)

    @property
    def max_abs_row_sum(self) -> int:
        return max(sum(abs(x) for x in row) for row in self.entries)

    def __matmul__(self, other: "ToralMap") -> "ToralMap":
        return ToralMap(_exact.mat_mul(self.entries, other.entries))

    def power(self, n: int) -> "ToralMap":
        if n < 0:
            return self.inverse().power(-n)
        return ToralMap(_exact.mat_pow(self.entries, n))

    def inverse(self) -> "ToralMap":
        if not self.is_invertible:
            raise ValueError(f"{self.kind} has no inverse on the torus")
        return ToralMap(_exact.inverse(self.entries))

    def scalar_factor(self):
        """b if the map is x -> b*x, else None."""
        b = self.entries[0][0]
        if self.entries == _exact.mat_scale(b, _exact.identity(self.dim)):
            return b
        return None


@dataclass(frozen=True)
class Eigenvalue:
    value: complex
    multiplicity: int
    radius: float
    location: str
    factor: tuple  # irreducible integer factor the root belongs to
    index: int

    @property
    def modulus(self) -> float:
        return abs(self.value)

    def log_modulus(self) -> tuple[float, float]:
        """(log|lambda|, certified error bound)."""
        mod = abs(self.value)
        if self.radius >= mod:
            return math.log(mod), math.inf
        err = self.radius / (mod - self.radius)
        val = math.log(mod)
        return val, err + 4e-16 * max(1.0, abs(val))


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: tuple  # sorted: descending modulus, ascending argument, index
    dim: int

    @property
    def ordering(self) -> tuple:
        return tuple(e.index for e in self.eigenvalues)

    def total_multiplicity(self) -> int:
        return sum(e.multiplicity for e in self.eigenvalues)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "eigenvalues": [
                {
                    "re": e.value.real,
                    "im": e.value.imag,
                    "multiplicity": e.multiplicity,
                    "radius": e.radius,
                    "location": e.location,
                    "factor": list(e.factor),
                }
                for e in self.eigenvalues
            ],
        }


@dataclass(frozen=True)
class EntropyReport:
    h_top: float
    h_top_error: float
    kappa: float
    kappa_error: float
    expanding_dim: int
    contracting_dim: int
    neutral_dim: int
    hyperbolic: bool
    ergodic: bool
    kappa_degenerate: bool = False
    # (log|lambda|, error, multiplicity) for expanding eigenvalues, largest first
    expanding: tuple = field(default=())
    contracting: tuple = field(default=())

    @property
    def dim(self) -> int:
        return self.expanding_dim + self.contracting_dim + self.neutral_dim

    @property
    def log_lambda1(self) -> float:
        return self.expanding[0][0] if self.expanding else 0.0

    def to_dict(self) -> dict:
        return {
            "h_top": [self.h_top, self.h_top_error],
            "kappa": [self.kappa, self.kappa_error],
            "kappa_degenerate": self.kappa_degenerate,
            "expanding_dim": self.expanding_dim,
            "contracting_dim": self.contracting_dim,
            "neutral_dim": self.neutral_dim,
            "hyperbolic": self.hyperbolic,
            "ergodic": self.ergodic,
            "expanding_logs": [[v, e, m] for v, e, m in self.expanding],
            "contracting_logs": [[v, e, m] for v, e, m in self.contracting],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def char_poly(m: ToralMap) -> list[int]:
    """Exact coefficients of det(xI - M), leading coefficient first."""
    return [int(c) for c in _exact.char_poly(m.entries)]


def irreducible_factors(coeffs) -> list[tuple[list[int], int]]:
    """Factorization over Z into monic irreducibles with exponents."""
    x = sympy.Symbol("x")
    _, factors = sympy.Poly([int(c) for c in coeffs], x, domain="ZZ").factor_list()
    out = []
    for poly, e in factors:
        c = [int(v) for v in poly.all_coeffs()]
        if c[0] < 0:
            c = [-v for v in c]
        out.append((c, int(e)))
    out.sort(key=lambda fe: (len(fe[0]), fe[0]))
    return out


def is_irreducible(coeffs) -> bool:
    factors = irreducible_factors(coeffs)
    return len(factors) == 1 and factors[0][1] == 1


def has_root_of_unity(coeffs) -> bool:
    return bool(_exact.cyclotomic_factors(list(coeffs)))


# -- Gaussian rationals as (re, im) Fraction pairs ---------------------------

def _gmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _gsub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def _gabs2(a):
    return a[0] * a[0] + a[1] * a[1]


def _geval(coeffs, z):
    acc = (Fraction(0), Fraction(0))
    for c in coeffs:
        acc = _gmul(acc, z)
        acc = (acc[0] + c, acc[1])
    return acc


def _sqrt_upper(x: Fraction) -> float:
    """A float r with r*r >= x exactly."""
    if x <= 0:
        return 0.0
    r = math.sqrt(float(x)) * (1 + 1e-15)
    if r == 0.0:
        r = 5e-324
    while Fraction(r) ** 2 < x:
        r *= 1 + 1e-12
    return r


def _snap(v, bits: int) -> Fraction:
    scale = mpmath.mpf(2) ** bits
    return Fraction(int(mpmath.nint(v * scale)), 1 << bits)


def _approx_roots(factor: list[int], dps: int):
    """Approximate roots snapped to Gaussian rationals, conjugation-symmetric."""
    deg = len(factor) - 1
    if deg == 1:
        return [(Fraction(-factor[1], factor[0]), Fraction(0))]
    bits = int(dps * 3.33) + 8
    with mpmath.workdps(dps):
        roots = mpmath.polyroots(factor, maxsteps=max(200, 20 * deg), extraprec=2 * dps)
        tiny = mpmath.mpf(10) ** (-(dps // 2))
        reals = [r for r in roots if abs(mpmath.im(r)) <= tiny]
        uppers = [r for r in roots if mpmath.im(r) > tiny]
        lowers = [r for r in roots if mpmath.im(r) < -tiny]
        if len(uppers) != len(lowers):
            raise ArithmeticError("unpaired complex roots")
        out = [(_snap(mpmath.re(r), bits), Fraction(0)) for r in sorted(reals, key=lambda r: mpmath.re(r))]
        for r in sorted(uppers, key=lambda r: (mpmath.re(r), mpmath.im(r))):
            re_, im_ = _snap(mpmath.re(r), bits), _snap(mpmath.im(r), bits)
            out.append((re_, -im_))
            out.append((re_, im_))
    return out


def _inclusion_radii(factor: list[int], zs) -> list[float]:
    deg = len(factor) - 1
    lead = factor[0]
    radii = []
    for i, z in enumerate(zs):
        val = _geval(factor, z)
        if val == (0, 0):
            radii.append(0.0)
            continue
        den = (Fraction(lead), Fraction(0))
        for j, w in enumerate(zs):
            if j != i:
                den = _gmul(den, _gsub(z, w))
        d2 = _gabs2(den)
        if d2 == 0:
            radii.append(math.inf)
            continue
        w2 = _gabs2(val) / d2
        radii.append(_sqrt_upper(w2 * deg * deg))
    return radii


def _disjoint(z1, r1, z2, r2) -> bool:
    if math.isinf(r1) or math.isinf(r2):
        return False
    return _gabs2(_gsub(z1, z2)) > (Fraction(r1) + Fraction(r2)) ** 2


def _circle_position(z, r: float) -> str:
    if math.isinf(r):
        return UNRESOLVED
    m2 = _gabs2(z)
    rr = Fraction(r)
    if m2 > (1 + rr) ** 2:
        return EXPANDING
    if rr < 1 and m2 < (1 - rr) ** 2:
        return CONTRACTING
    return UNRESOLVED


def _unimodular_root_count(factor: list[int]) -> int:
    """Exact number of roots on |z| = 1 of an irreducible integer polynomial.

    A unimodular root forces the factor to be self-reciprocal; writing
    f(x) = x^n g(x + 1/x) turns unimodular roots into real roots of g in [-2, 2].
    """
    if _exact.cyclotomic_factors(factor):
        return len(factor) - 1
    if factor != factor[::-1] and factor != [-c for c in factor[::-1]]:
        return 0
    deg = len(factor) - 1
    if deg % 2:
        return 0
    n = deg // 2
    low = factor[::-1]
    # Dickson-type polynomials D_k(y) = x^k + x^-k with y = x + 1/x
    y = sympy.Symbol("y")
    dk = [sympy.Integer(2), y]
    for _ in range(2, n + 1):
        dk.append(sympy.expand(y * dk[-1] - dk[-2]))
    g = sympy.Integer(low[n])
    for k in range(1, n + 1):
        g += low[n + k] * dk[k]
    return 2 * int(sympy.Poly(sympy.expand(g), y).count_roots(-2, 2))


def spectral_data(m: ToralMap, precision: float = 1e-12, max_dps: int = 2000) -> SpectralData:
    """Certified eigenvalue disks for a nonsingular integer matrix.

    Parameters
    ----------
    m : ToralMap
    precision : float
        Every certified disk radius ends up at most this value.
    max_dps : int
        Working-precision ceiling; hitting it raises PrecisionExhausted.
    """
    if m.det == 0:
        raise ValueError("spectral_data needs a nonsingular map")
    factors = irreducible_factors(char_poly(m))
    dps = 30
    while True:
        try:
            cert = _certify(factors, dps, precision)
        except ArithmeticError:
            cert = None
        if cert is not None:
            break
        dps *= 2
        if dps > max_dps:
            raise PrecisionExhausted(f"root isolation not certified at {max_dps} digits")
    eigs = sorted(cert, key=lambda e: (-_gabs2(e[0]), math.atan2(float(e[0][1]), float(e[0][0])), e[5]))
    out = tuple(
        Eigenvalue(complex(float(z[0]), float(z[1])), mult, r, loc, tuple(f), idx)
        for z, mult, r, loc, f, idx in eigs
    )
    return SpectralData(out, m.dim)


def _certify(factors, dps: int, precision: float):
    entries = []
    idx = 0
    for f, e in factors:
        zs = _approx_roots(f, dps)
        radii = _inclusion_radii(f, zs)
        for z, r in zip(zs, radii):
            entries.append([z, e, r, None, f, idx])
            idx += 1
    for i in range(len(entries)):
        if entries[i][2] > precision:
            return None
        for j in range(i + 1, len(entries)):
            if not _disjoint(entries[i][0], entries[i][2], entries[j][0], entries[j][2]):
                return None
    by_factor: dict[tuple, list] = {}
    for ent in entries:
        ent[3] = _circle_position(ent[0], ent[2])
        by_factor.setdefault(tuple(ent[4]), []).append(ent)
    for f, group in by_factor.items():
        straddling = [ent for ent in group if ent[3] == UNRESOLVED]
        if not straddling:
            continue
        if len(straddling) == _unimodular_root_count(list(f)):
            for ent in straddling:
                ent[3] = NEUTRAL
        elif dps < 1000:
            return None
    return entries


def entropy_report(m: ToralMap, spec: SpectralData | None = None) -> EntropyReport:
    """Topological entropy, kappa threshold and (partial) hyperbolicity."""
    if spec is None:
        spec = spectral_data(m)
    if any(e.location == UNRESOLVED for e in spec.eigenvalues):
        raise NeutralSpectrum("an eigenvalue disk straddles the unit circle")
    expanding, contracting = [], []
    dims = {EXPANDING: 0, CONTRACTING: 0, NEUTRAL: 0}
    for e in spec.eigenvalues:
        dims[e.location] += e.multiplicity
        if e.location == EXPANDING:
            expanding.append((*e.log_modulus(), e.multiplicity))
        elif e.location == CONTRACTING:
            contracting.append((*e.log_modulus(), e.multiplicity))
    h = math.fsum(v * k for v, _, k in expanding)
    h_err = math.fsum(err * k for _, err, k in expanding) + 1e-15 * h
    copies = sum(k for _, _, k in expanding)
    if copies <= 1:
        kappa, kappa_err, degenerate = 0.0, 0.0, True
    else:
        smallest, s_err, _ = min(expanding, key=lambda t: t[0])
        kappa = (h - smallest) / h
        kappa_err = s_err / h + smallest * h_err / (h * h)
        degenerate = False
    return EntropyReport(
        h_top=h,
        h_top_error=h_err,
        kappa=kappa,
        kappa_error=kappa_err,
        expanding_dim=dims[EXPANDING],
        contracting_dim=dims[CONTRACTING],
        neutral_dim=dims[NEUTRAL],
        hyperbolic=dims[NEUTRAL] == 0,
        ergodic=not has_root_of_unity(char_poly(m)),
        kappa_degenerate=degenerate,
        expanding=tuple(expanding),
        contracting=tuple(contracting),
    )
