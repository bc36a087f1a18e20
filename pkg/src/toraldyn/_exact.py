"""Exact matrix and polynomial arithmetic over Python ints and Fractions.

Matrices are tuples of row tuples. Polynomials are coefficient lists with the
leading coefficient first (``[1, -3, 1]`` is ``x**2 - 3x + 1``).
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd

Matrix = tuple  # tuple[tuple[int | Fraction, ...], ...]


def as_matrix(rows) -> Matrix:
    return tuple(tuple(r) for r in rows)


def identity(n: int) -> Matrix:
    return tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    cols = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in cols) for row in a)


def mat_vec(a: Matrix, v) -> tuple:
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_scale(c, a: Matrix) -> Matrix:
    return tuple(tuple(c * x for x in row) for row in a)


def mat_pow(a: Matrix, n: int) -> Matrix:
    if n < 0:
        raise ValueError("negative power; invert first")
    result = identity(len(a))
    base = a
    while n:
        if n & 1:
            result = mat_mul(result, base)
        n >>= 1
        if n:
            base = mat_mul(base, base)
    return result


def mat_pow_mod(a: Matrix, n: int, modulus: int) -> Matrix:
    """Integer matrix power with entries reduced mod ``modulus``."""
    result = identity(len(a))
    base = tuple(tuple(x % modulus for x in row) for row in a)
    while n:
        if n & 1:
            result = tuple(tuple(x % modulus for x in row) for row in mat_mul(result, base))
        n >>= 1
        if n:
            base = tuple(tuple(x % modulus for x in row) for row in mat_mul(base, base))
    return result


def determinant(a: Matrix):
    """Fraction-free Bareiss elimination; exact for int entries."""
    n = len(a)
    if n == 0:
        return 1
    m = [list(r) for r in a]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = m[i][j] * m[k][k] - m[i][k] * m[k][j]
                m[i][j] = num // prev if isinstance(num, int) and isinstance(prev, int) else num / prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def inverse(a: Matrix) -> Matrix:
    """Gauss-Jordan inverse over the rationals; int entries kept when integral."""
    n = len(a)
    m = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [x / p for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return tuple(tuple(_demote(x) for x in row[n:]) for row in m)


def _demote(x):
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return x


def trace(a: Matrix):
    return sum(a[i][i] for i in range(len(a)))


def char_poly(a: Matrix) -> list:
    """Coefficients of det(xI - A) by Faddeev-LeVerrier (divisions are exact)."""
    n = len(a)
    coeffs = [1]
    m = identity(n)
    for k in range(1, n + 1):
        am = mat_mul(a, m)
        num = -trace(am)
        if isinstance(num, int):
            q, r = divmod(num, k)
            if r:
                raise ArithmeticError("non-integral Faddeev-LeVerrier step")
            c = q
        else:
            c = _demote(Fraction(num) / k)
        coeffs.append(c)
        m = mat_add(am, mat_scale(c, identity(n)))
    return coeffs


# -- polynomials (leading coefficient first) --------------------------------

def poly_trim(p: list) -> list:
    i = 0
    while i < len(p) - 1 and p[i] == 0:
        i += 1
    return list(p[i:])


def poly_mul(p: list, q: list) -> list:
    out = [0] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        for j, y in enumerate(q):
            out[i + j] += x * y
    return out


def poly_divmod(p: list, q: list) -> tuple[list, list]:
    """Division by a monic (or unit-leading) integer polynomial stays in Z[x]."""
    p = poly_trim(p)
    q = poly_trim(q)
    lead = q[0]
    out = []
    rem = list(p)
    while len(rem) >= len(q):
        c = rem[0]
        if isinstance(c, int) and isinstance(lead, int) and c % lead == 0:
            c //= lead
        else:
            c = Fraction(c) / lead
        out.append(c)
        for i in range(len(q)):
            rem[i] -= c * q[i]
        rem.pop(0)
    return (out or [0]), poly_trim(rem or [0])


def poly_eval(p: list, x):
    acc = 0
    for c in p:
        acc = acc * x + c
    return acc


def poly_is_zero(p: list) -> bool:
    return all(c == 0 for c in p)


@lru_cache(maxsize=None)
def _cyclotomic(n: int) -> tuple:
    num = [1] + [0] * (n - 1) + [-1]
    for d in range(1, n):
        if n % d == 0:
            num, rem = poly_divmod(num, list(_cyclotomic(d)))
            assert poly_is_zero(rem)
    return tuple(num)


def cyclotomic(n: int) -> list:
    """The n-th cyclotomic polynomial, built by exact division of x**n - 1."""
    if n < 1:
        raise ValueError("n must be positive")
    return list(_cyclotomic(n))


def euler_phi(n: int) -> int:
    result = n
    p = 2
    m = n
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            result -= result // p
        p += 1
    if m > 1:
        result -= result // m
    return result


def cyclotomic_factors(p: list) -> list[tuple[int, int]]:
    """All (n, exponent) with Phi_n dividing p, by exhaustive trial division.

    Only n with phi(n) <= deg p can divide; phi(n) >= sqrt(n/2) bounds the scan.
    """
    deg = len(poly_trim(p)) - 1
    found = []
    rest = poly_trim(p)
    for n in range(1, 2 * deg * deg + 3):
        if euler_phi(n) > deg:
            continue
        phi_n = cyclotomic(n)
        e = 0
        while len(rest) > 1:
            quo, rem = poly_divmod(rest, phi_n)
            if not poly_is_zero(rem):
                break
            rest = quo
            e += 1
        if e:
            found.append((n, e))
    return found


def content_gcd(values) -> int:
    g = 0
    for v in values:
        g = gcd(g, int(v))
    return g
