"""Avoid-ball sets of x -> b*x on T^1 as subshifts of finite type.

Words of length L are coded big-endian in base b, so the code of ``w`` is the
index of the half-open cylinder [code * b^-L, (code + 1) * b^-L).
"""
from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateShift, EmptyShift, PrecisionExhausted, WindowTooCoarse

INNER = "inner"
OUTER = "outer"
_DIGITS = string.digits + string.ascii_lowercase
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class BallSpec:
    """Open ball (a cube in the sup metric when d > 1) around ``center`` mod 1."""

    center: tuple
    radius: Fraction

    def __init__(self, center, radius):
        if not isinstance(center, (tuple, list)):
            center = (center,)
        center = tuple(Fraction(c) % 1 for c in center)
        radius = Fraction(radius)
        if not 0 < radius < Fraction(1, 2):
            raise ValueError(f"radius must lie in (0, 1/2), got {radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, point) -> bool:
        """Exact membership of a point given by rational coordinates."""
        if not isinstance(point, (tuple, list)):
            point = (point,)
        for x, c in zip(point, self.center):
            t = (Fraction(x) - c) % 1
            if not (t < self.radius or t > 1 - self.radius):
                return False
        return True

    def to_dict(self) -> dict:
        return {"center": [str(c) for c in self.center], "radius": str(self.radius)}


@dataclass(frozen=True)
class SftSpec:
    base: int
    window: int
    forbidden: frozenset  # word codes
    polarity: str

    def word(self, code: int) -> str:
        return code_to_word(code, self.base, self.window)

    def forbidden_words(self) -> list[str]:
        return [self.word(c) for c in sorted(self.forbidden)]

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "window": self.window,
            "forbidden": self.forbidden_words(),
            "polarity": self.polarity,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "SftSpec":
        base, window = int(data["base"]), int(data["window"])
        codes = frozenset(word_to_code(w, base) for w in data["forbidden"])
        for w in data["forbidden"]:
            if len(w) != window:
                raise ValueError(f"forbidden word {w!r} does not have length {window}")
        return cls(base, window, codes, data.get("polarity", INNER))

    @classmethod
    def from_words(cls, base: int, words, polarity: str = INNER) -> "SftSpec":
        words = list(words)
        window = len(words[0]) if words else 1
        return cls.from_dict({"base": base, "window": window, "forbidden": words, "polarity": polarity})


def code_to_word(code: int, base: int, length: int) -> str:
    out = []
    for _ in range(length):
        code, r = divmod(code, base)
        out.append(_DIGITS[r])
    return "".join(reversed(out))


def word_to_code(word: str, base: int) -> int:
    code = 0
    for ch in word:
        d = _DIGITS.index(ch)
        if d >= base:
            raise ValueError(f"digit {ch!r} out of range for base {base}")
        code = code * base + d
    return code


def avoid_ball_sft(base: int, ball: BallSpec, window: int) -> tuple[SftSpec, SftSpec]:
    """Inner and outer SFT approximations of the set of points whose xb-orbit avoids ``ball``.

    The inner spec forbids every length-``window`` cylinder meeting the open
    ball; the outer spec forbids only cylinders inside the closed ball.
    """
    if base < 2:
        raise ValueError("base must be at least 2")
    if window < 1:
        raise ValueError("window must be at least 1")
    if ball.dim != 1:
        raise ValueError("symbolic avoid-ball sets live on T^1")
    n_words = base ** window
    if 2 * ball.radius * n_words < 1:
        raise WindowTooCoarse(f"cylinder length {base}^-{window} exceeds the ball diameter {2 * ball.radius}")
    c, r = ball.center[0], ball.radius
    inner, outer = set(), set()
    for k in (-1, 0, 1):
        p, q = (c - r + k) * n_words, (c + r + k) * n_words
        lo, hi = max(0, math.floor(p)), min(n_words - 1, math.ceil(q) - 1)
        inner.update(range(lo, hi + 1))
        lo, hi = max(0, math.ceil(p)), min(n_words - 1, math.floor(q) - 1)
        outer.update(range(lo, hi + 1))
    return (
        SftSpec(base, window, frozenset(inner), INNER),
        SftSpec(base, window, frozenset(outer), OUTER),
    )


@dataclass(frozen=True)
class PerronData:
    base: int
    window: int
    states: np.ndarray  # codes of surviving length-(L-1) words
    transfer_matrix: sp.csr_matrix  # over ``states``
    component: np.ndarray  # indices into ``states`` of the principal recurrent class
    spectral_radius: float
    radius_error: float
    right_vector: np.ndarray  # over ``component``, sums to 1
    left_vector: np.ndarray  # over ``component``, left @ right == 1
    vector_error: float  # ||A v - rho v||_inf bound for the right vector
    min_row_sum: int
    max_row_sum: int

    @property
    def entropy(self) -> float:
        return math.log(self.spectral_radius)

    @property
    def entropy_error(self) -> float:
        return self.radius_error / max(self.spectral_radius - self.radius_error, 1e-300)

    @property
    def dimension(self) -> float:
        return self.entropy / math.log(self.base)

    @property
    def bracket(self) -> tuple[float, float]:
        return self.spectral_radius - self.radius_error, self.spectral_radius + self.radius_error

    def component_matrix(self) -> sp.csr_matrix:
        return self.transfer_matrix[self.component][:, self.component]

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "window": self.window,
            "n_states": int(len(self.states)),
            "component_size": int(len(self.component)),
            "spectral_radius": [self.spectral_radius, self.radius_error],
            "entropy": [self.entropy, self.entropy_error],
            "dimension": [self.dimension, self.entropy_error / math.log(self.base)],
            "row_sums": [self.min_row_sum, self.max_row_sum],
        }


def transfer_edges(spec: SftSpec):
    """(src, dst, symbol) arrays over all de Bruijn states, forbidden words removed."""
    b, L = spec.base, spec.window
    words = np.arange(b ** L, dtype=np.int64)
    if spec.forbidden:
        keep = ~np.isin(words, np.fromiter(spec.forbidden, dtype=np.int64))
        words = words[keep]
    n_states = b ** (L - 1)
    return words // b, words % n_states, words % b


def _prune(src, dst, n_states):
    alive = np.ones(n_states, dtype=bool)
    while True:
        live = alive[src] & alive[dst]
        out_deg = np.bincount(src[live], minlength=n_states)
        in_deg = np.bincount(dst[live], minlength=n_states)
        nxt = alive & (out_deg > 0) & (in_deg > 0)
        if np.array_equal(nxt, alive):
            return alive
        alive = nxt


def _collatz_wielandt(a: sp.csr_matrix, v: np.ndarray, tol: float, max_iter: int):
    """Power iteration on A + I; returns (lo, hi, v) with lo <= rho(A) <= hi."""
    n = a.shape[0]
    v = np.abs(v)
    if not np.all(v > 0):
        v = v + v.max() * 1e-3 + 1e-300
    v = v / v.sum()
    row_nnz = np.diff(a.indptr).max(initial=1)
    for _ in range(max_iter):
        w = a @ v
        ratios = w / v
        lo, hi = ratios.min(), ratios.max()
        # rounding in (A v)_i and the division
        pad = (row_nnz + 3) * _EPS * hi
        if hi - lo <= tol:
            return lo - pad, hi + pad, v
        v = w + v
        v = v / v.sum()
        if not np.all(v > 0):
            v = np.maximum(v, 1e-300)
    raise PrecisionExhausted(f"Perron bracket wider than {tol} after {max_iter} iterations (n={n})")


def _initial_vector(a: sp.csr_matrix) -> np.ndarray:
    n = a.shape[0]
    if n == 1:
        return np.ones(1)
    if n <= 1500:
        vals, vecs = np.linalg.eig(a.toarray().astype(float))
        k = int(np.argmax(vals.real))
        return np.abs(vecs[:, k].real)
    try:
        from scipy.sparse.linalg import eigs

        vals, vecs = eigs(a.astype(float), k=1, which="LR", tol=1e-12, maxiter=20 * n)
        return np.abs(vecs[:, 0].real)
    except Exception:
        return np.ones(n)


def perron(spec: SftSpec, tolerance: float = 1e-12, max_iter: int = 200_000) -> PerronData:
    """Certified Perron data of the de Bruijn transfer matrix of ``spec``.

    Dead states are pruned to a fixpoint; the spectral radius is that of the
    strongly connected class with the largest Perron root, bracketed by
    Collatz-Wielandt bounds of width at most ``tolerance``.
    """
    b, L = spec.base, spec.window
    n_states = b ** (L - 1)
    src, dst, _ = transfer_edges(spec)
    alive = _prune(src, dst, n_states)
    if not alive.any():
        raise EmptyShift("every state was pruned: the approximation is empty at this window")
    states = np.flatnonzero(alive)
    relabel = -np.ones(n_states, dtype=np.int64)
    relabel[states] = np.arange(len(states))
    live = alive[src] & alive[dst]
    rows, cols = relabel[src[live]], relabel[dst[live]]
    n = len(states)
    a = sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(n, n))
    a.sum_duplicates()

    _, labels = connected_components(a, directed=True, connection="strong")
    best = None
    for lab in np.unique(labels):
        comp = np.flatnonzero(labels == lab)
        sub = a[comp][:, comp]
        if sub.nnz == 0:
            continue
        sub_f = sub.astype(float)
        sums = np.asarray(sub.sum(axis=1)).ravel()
        if sums.min() == sums.max():
            # constant row sums: the all-ones vector is exact
            lo = hi = float(sums[0])
            v = np.ones(len(comp))
        else:
            lo, hi, v = _collatz_wielandt(sub_f, _initial_vector(sub_f), tolerance, max_iter)
            # a strongly connected class with an edge has a cycle, so rho >= 1
            lo, hi = max(lo, 1.0), max(hi, 1.0)
        if best is None or lo > best[1] + (best[2] - best[1]):
            best = (comp, lo, hi, v, sub_f)
    if best is None:
        raise EmptyShift("no recurrent class survives pruning")
    comp, lo, hi, v, sub_f = best
    _, _, u = _collatz_wielandt(sub_f.T.tocsr(), _initial_vector(sub_f.T.tocsr()), tolerance, max_iter)
    rho = 0.5 * (lo + hi)
    v = v / v.sum()
    u = u / (u @ v)
    residual = float(np.abs(sub_f @ v - rho * v).max()) + (hi - lo) * float(v.max())
    row_sums = np.asarray(sub_f.sum(axis=1)).ravel()
    return PerronData(
        base=b,
        window=L,
        states=states,
        transfer_matrix=a,
        component=comp,
        spectral_radius=float(rho),
        radius_error=float(0.5 * (hi - lo)),
        right_vector=v,
        left_vector=u,
        vector_error=residual,
        min_row_sum=int(row_sums.min()),
        max_row_sum=int(row_sums.max()),
    )


@dataclass(frozen=True)
class ParryChain:
    """Maximal-entropy Markov chain on the principal class of de Bruijn states."""

    base: int
    window: int
    codes: np.ndarray  # state codes, one per chain state
    next_state: np.ndarray  # (n, b) chain-state index or -1
    cumulative: np.ndarray  # (n, b) cumulative transition probabilities
    stationary: np.ndarray

    def transition_matrix(self) -> np.ndarray:
        n = len(self.codes)
        probs = np.diff(np.concatenate([np.zeros((n, 1)), self.cumulative], axis=1), axis=1)
        out = np.zeros((n, n))
        for i in range(n):
            for a in range(self.base):
                j = self.next_state[i, a]
                if j >= 0:
                    out[i, j] += probs[i, a]
        return out


def parry_chain(spec: SftSpec, data: PerronData) -> ParryChain:
    b, L = spec.base, spec.window
    if len(data.component) == 0:
        raise DegenerateShift("no recurrent class")
    codes = data.states[data.component]
    n_states = b ** (L - 1)
    pos = -np.ones(n_states, dtype=np.int64)
    pos[codes] = np.arange(len(codes))
    words = codes[:, None] * b + np.arange(b)[None, :]
    allowed = ~np.isin(words, np.fromiter(spec.forbidden, dtype=np.int64, count=len(spec.forbidden)))
    nxt = pos[words % n_states]
    nxt[~allowed] = -1
    v = data.right_vector
    weights = np.where(nxt >= 0, v[np.maximum(nxt, 0)], 0.0) / (data.spectral_radius * v[:, None])
    totals = weights.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise DegenerateShift("a state has no admissible continuation")
    probs = weights / totals
    cum = np.cumsum(probs, axis=1)
    # close each row at its last admissible symbol so rounding never selects a forbidden one
    last = b - 1 - np.argmax((nxt >= 0)[:, ::-1], axis=1)
    cum[np.arange(b)[None, :] >= last[:, None]] = 1.0
    stat = data.left_vector * v
    stat = stat / stat.sum()
    return ParryChain(b, L, codes, nxt, cum, stat)


@numba.njit(cache=True)
def _run_chain(cum, nxt, state, uniforms, out, offset):
    b = cum.shape[1]
    for k in range(uniforms.shape[0]):
        u = uniforms[k]
        a = 0
        while a < b - 1 and u >= cum[state, a]:
            a += 1
        out[offset + k] = a
        state = nxt[state, a]
    return state


def rng_for(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based Philox stream, reproducible per (seed, index) on every platform."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def parry_sample(spec: SftSpec, data: PerronData, length: int, seed: int, index: int = 0,
                 chain: ParryChain | None = None) -> np.ndarray:
    """A length-``length`` admissible digit word drawn from the Parry measure."""
    if chain is None:
        chain = parry_chain(spec, data)
    rng = rng_for(seed, index)
    start = int(np.searchsorted(np.cumsum(chain.stationary), rng.random(), side="right"))
    start = min(start, len(chain.codes) - 1)
    head = np.array([int(ch, 36) for ch in code_to_word(int(chain.codes[start]), spec.base, spec.window - 1)],
                    dtype=np.uint8)
    out = np.empty(max(length, len(head)), dtype=np.uint8)
    out[: len(head)] = head
    steps = len(out) - len(head)
    if steps:
        _run_chain(chain.cumulative, chain.next_state, start, rng.random(steps), out, len(head))
    return out[:length]


def window_codes(spec: SftSpec, digits: np.ndarray) -> np.ndarray:
    """Codes of every length-L factor of ``digits``."""
    L, b = spec.window, spec.base
    n = len(digits) - L + 1
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    codes = np.zeros(n, dtype=np.int64)
    d = digits.astype(np.int64)
    for i in range(L):
        codes = codes * b + d[i : i + n]
    return codes


def first_forbidden(spec: SftSpec, digits: np.ndarray) -> int | None:
    """Position of the first forbidden factor, or None when the word is admissible."""
    if not spec.forbidden:
        return None
    bad = np.isin(window_codes(spec, digits), np.fromiter(spec.forbidden, dtype=np.int64))
    hits = np.flatnonzero(bad)
    return int(hits[0]) if len(hits) else None


def is_admissible(spec: SftSpec, digits) -> bool:
    return first_forbidden(spec, np.asarray(digits, dtype=np.uint8)) is None


def digits_to_string(digits: np.ndarray) -> str:
    if len(digits) and int(digits.max()) >= 10:
        return "".join(_DIGITS[int(x)] for x in digits)
    return (np.asarray(digits, dtype=np.uint8) + 48).tobytes().decode("ascii")


def sample_export(digits: np.ndarray, base: int, decimals: int = 17) -> dict:
    """Exact digit string plus a decimal approximation of the point."""
    text = digits_to_string(digits)
    approx = Fraction(int(text, base) if text else 0, base ** len(text)) if len(text) <= 4096 else None
    if approx is None:
        head = text[:64]
        approx = Fraction(int(head, base), base ** len(head))
    return {"base": base, "digits": text, "approx": f"{float(approx):.{decimals}g}"}


def admissible_words(spec: SftSpec, length: int) -> np.ndarray:
    """Sorted codes of the length-``length`` words with no forbidden factor.

    Words ending in a dead de Bruijn state (one that cannot be continued
    forever) are dropped once the word is long enough to determine its state.
    """
    b, L = spec.base, spec.window
    forbidden = np.fromiter(spec.forbidden, dtype=np.int64) if spec.forbidden else np.zeros(0, np.int64)
    codes = np.zeros(1, dtype=np.int64)
    for n in range(1, length + 1):
        codes = (codes[:, None] * b + np.arange(b)).reshape(-1)
        if n >= L and len(forbidden):
            codes = codes[~np.isin(codes % b**L, forbidden)]
    if length >= L - 1 and L > 1:
        src, dst, _ = transfer_edges(spec)
        alive = _prune(src, dst, b ** (L - 1))
        codes = codes[alive[codes % b ** (L - 1)]]
    return codes
