"""Exact combinatorics and angular-momentum coupling.

Rationals are :class:`fractions.Fraction`.  Amplitudes that are square roots
of rationals are carried as :class:`SqrtRational` (sign times the root of a
non-negative rational); products of those stay exact, sums are deliberately
not offered.  Angular momentum labels are :class:`HalfInteger` values that
store twice the quantum number.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError

__all__ = [
    "BigRational",
    "HalfInteger",
    "SqrtRational",
    "binomial_exact",
    "factorial_exact",
    "ln_factorial",
    "cg_general",
    "e_lambda",
    "delta_norm",
]

BigRational = Fraction


@dataclass(frozen=True, order=True)
class HalfInteger:
    """An integer or half-integer stored as ``twice_value``."""

    twice_value: int

    def __post_init__(self):
        if not isinstance(self.twice_value, int):
            raise TypeError("twice_value must be an int")

    @classmethod
    def of(cls, value) -> "HalfInteger":
        """Coerce an int, Fraction, float, ``"p/q"`` string or HalfInteger."""
        if isinstance(value, HalfInteger):
            return value
        if isinstance(value, str):
            value = Fraction(value)
        twice = Fraction(value) * 2
        if twice.denominator != 1:
            raise DomainError(f"{value!r} is not a multiple of 1/2")
        return cls(int(twice))

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice_value, 2)

    @property
    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __add__(self, other):
        return HalfInteger(self.twice_value + HalfInteger.of(other).twice_value)

    def __sub__(self, other):
        return HalfInteger(self.twice_value - HalfInteger.of(other).twice_value)

    def __neg__(self):
        return HalfInteger(-self.twice_value)

    def __float__(self):
        return self.twice_value / 2

    def __str__(self):
        if self.is_integer:
            return str(self.twice_value // 2)
        return f"{self.twice_value}/2"


@dataclass(frozen=True)
class SqrtRational:
    """``sign * sqrt(radicand)`` with ``radicand`` a non-negative Fraction."""

    sign: int
    radicand: Fraction

    def __post_init__(self):
        radicand = Fraction(self.radicand)
        if radicand < 0:
            raise DomainError("radicand must be non-negative")
        if self.sign not in (-1, 0, 1):
            raise DomainError("sign must be -1, 0 or +1")
        sign = self.sign if radicand != 0 else 0
        if sign == 0:
            radicand = Fraction(0)
        object.__setattr__(self, "sign", sign)
        object.__setattr__(self, "radicand", radicand)

    @classmethod
    def from_rational(cls, r) -> "SqrtRational":
        r = Fraction(r)
        return cls((r > 0) - (r < 0), r * r)

    def square(self) -> Fraction:
        return self.radicand

    def __mul__(self, other):
        if not isinstance(other, SqrtRational):
            other = SqrtRational.from_rational(other)
        return SqrtRational(self.sign * other.sign, self.radicand * other.radicand)

    __rmul__ = __mul__

    def __neg__(self):
        return SqrtRational(-self.sign, self.radicand)

    def __abs__(self):
        return SqrtRational(abs(self.sign), self.radicand)

    def __float__(self):
        # sqrt of num and den separately keeps precision for huge integers
        r = self.radicand
        if r == 0:
            return 0.0
        return self.sign * math.exp(0.5 * (_log_int(r.numerator) - _log_int(r.denominator)))

    def __str__(self):
        if self.sign == 0:
            return "0"
        return f"{'-' if self.sign < 0 else '+'}sqrt({self.radicand})"


def _log_int(n: int) -> float:
    if n.bit_length() < 1000:
        return math.log(n)
    shift = n.bit_length() - 900
    return math.log(n >> shift) + shift * math.log(2)


# -- factorials ------------------------------------------------------------

_fact_table = [1]
_fact_lock = threading.Lock()


def factorial_exact(n: int) -> int:
    """n! as an exact integer, memoized."""
    if n < 0:
        raise DomainError(f"factorial of negative number {n}")
    table = _fact_table
    if n < len(table):
        return table[n]
    with _fact_lock:
        while len(_fact_table) <= n:
            _fact_table.append(_fact_table[-1] * len(_fact_table))
        return _fact_table[n]


def binomial_exact(n: int, k: int) -> int:
    """C(n, k), zero outside ``0 <= k <= n``."""
    if n < 0:
        raise DomainError(f"binomial requires n >= 0, got {n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


_LN_TABLE_SIZE = 256
_ln_fact_table = [math.log(math.factorial(k)) if k > 1 else 0.0 for k in range(_LN_TABLE_SIZE)]
_HALF_LN_2PI = 0.5 * math.log(2 * math.pi)


def ln_factorial(n: int) -> float:
    """ln(n!) from a table for small n and the Stirling series above it."""
    if n < 0:
        raise DomainError(f"ln_factorial of negative number {n}")
    if n < _LN_TABLE_SIZE:
        return _ln_fact_table[n]
    x = float(n)
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv * (1 / 12 - inv2 * (1 / 360 - inv2 * (1 / 1260 - inv2 / 1680)))
    return x * math.log(x) - x + 0.5 * math.log(x) + _HALF_LN_2PI + series


# -- Clebsch-Gordan ----------------------------------------------------------

def _check_jm(name_j, j: HalfInteger, name_m, m: HalfInteger):
    if j.twice_value < 0:
        raise DomainError(f"{name_j} must be non-negative, got {j}")
    if abs(m.twice_value) > j.twice_value:
        raise DomainError(f"|{name_m}| <= {name_j} violated: {name_m}={m}, {name_j}={j}")
    if (j.twice_value - m.twice_value) % 2:
        raise DomainError(f"{name_j}-{name_m} must be an integer: {name_j}={j}, {name_m}={m}")


def cg_general(j1, m1, j2, m2, J, M) -> SqrtRational:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> (Condon-Shortley).

    Arguments are anything :meth:`HalfInteger.of` accepts.  Evaluated with
    Racah's single-sum formula in exact rational arithmetic.
    """
    j1, m1, j2, m2, J, M = (HalfInteger.of(x) for x in (j1, m1, j2, m2, J, M))
    _check_jm("j1", j1, "m1", m1)
    _check_jm("j2", j2, "m2", m2)
    _check_jm("J", J, "M", M)
    if m1.twice_value + m2.twice_value != M.twice_value:
        raise DomainError(f"m1 + m2 = M violated: {m1} + {m2} != {M}")
    if not abs(j1.twice_value - j2.twice_value) <= J.twice_value <= j1.twice_value + j2.twice_value:
        raise DomainError(f"triangle condition |j1-j2| <= J <= j1+j2 violated: j1={j1}, j2={j2}, J={J}")
    if (j1.twice_value + j2.twice_value + J.twice_value) % 2:
        raise DomainError(f"j1 + j2 + J must be an integer: j1={j1}, j2={j2}, J={J}")

    # all combinations below are integers once the checks pass
    tj1, tm1, tj2, tm2, tJ, tM = (x.twice_value for x in (j1, m1, j2, m2, J, M))
    a = (tj1 + tj2 - tJ) // 2
    b = (tj1 - tm1) // 2
    c = (tj2 + tm2) // 2
    d = (tJ - tj2 + tm1) // 2
    e = (tJ - tj1 - tm2) // 2
    f = factorial_exact

    total = Fraction(0)
    for k in range(max(0, -d, -e), min(a, b, c) + 1):
        term = Fraction(1, f(k) * f(a - k) * f(b - k) * f(c - k) * f(d + k) * f(e + k))
        total += -term if k % 2 else term

    radicand = Fraction(
        (tJ + 1) * f((tJ + tj1 - tj2) // 2) * f((tJ - tj1 + tj2) // 2) * f(a),
        f((tj1 + tj2 + tJ) // 2 + 1),
    )
    radicand *= (
        f((tJ + tM) // 2) * f((tJ - tM) // 2)
        * f((tj1 - tm1) // 2) * f((tj1 + tm1) // 2)
        * f((tj2 - tm2) // 2) * f((tj2 + tm2) // 2)
    )
    return SqrtRational((total > 0) - (total < 0), total * total * radicand)


# -- closed forms for the two-row register -------------------------------------

def _check_p(M: int, N: int, p: int):
    if M < 0 or N < 0:
        raise DomainError(f"M and N must be non-negative, got M={M}, N={N}")
    if not max(0, M - N) <= p <= M:
        raise DomainError(f"photon number p={p} outside [{max(0, M - N)}, {M}] for M={M}, N={N}")


def e_lambda(M: int, N: int, p: int, lam: int) -> SqrtRational:
    """Row-Schmidt coefficient of the p-photon collapsed state.

    Weight of ``|M/2, M/2-lam>_top (x) |N/2, lam-N/2-p>_bottom`` with the
    explicit ``(-1)**(lam-p)`` sign.
    """
    _check_p(M, N, p)
    if not p <= lam <= min(M, N + p):
        raise DomainError(f"lambda={lam} outside [{p}, {min(M, N + p)}] for M={M}, N={N}, p={p}")
    f = factorial_exact
    prefactor = Fraction((-1) ** (lam - p) * f(N + p - lam) * f(lam), f(N - M + p) * f(p))
    inner = Fraction(
        f(p) * f(N - M + p) * f(M - p) * f(N - M + 2 * p),
        f(N + p + 1) * f(lam) * f(M - lam) * f(N - lam + p) * f(lam - p),
    )
    return SqrtRational.from_rational(prefactor) * SqrtRational(1, (N - M + 2 * p + 1) * inner)


def delta_norm(M: int, N: int, p: int) -> SqrtRational:
    """Normalization constant of the permutation-summed dimer state."""
    _check_p(M, N, p)
    f = factorial_exact
    radicand = Fraction(
        f(M) * f(N) * f(M - p) * f(N - M + p) * f(p) * f(N + p + 1),
        2 ** (M - p) * f(N - M + 2 * p + 1),
    )
    return SqrtRational(1, radicand)
