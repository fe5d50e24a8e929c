"""Photon-count statistics for the two-row product state.

The probability of detecting ``p`` photons from ``M`` up and ``N`` down spins
is

    P(p) = M! N! (1 + 2p + N - M) / ((M - p)! (1 + N + p)!)

for ``max(0, M-N) <= p <= M``.  Writing it as

    P(p) = (1 + 2p + N - M) * C(N+M+1, M-p) / ((N+M+1) * C(N+M, M))

gives integer weights over a common denominator, which is how the exact
moments are accumulated.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .algebra import binomial_exact, ln_factorial
from .errors import DomainError

__all__ = [
    "EmissionDistribution",
    "SweepPoint",
    "Regime",
    "AsymptoticCurve",
    "emission_probability",
    "emission_probability_float",
    "emission_distribution",
    "mean_gamma",
    "variance_gamma",
    "spinon_stats",
    "approx_distribution",
    "approx_peak_location",
    "sweep_alpha",
    "sweep_point",
    "extrapolate_thermo",
    "as_fraction",
]


def _check(M: int, N: int, p: int):
    if M < 0 or N < 0:
        raise DomainError(f"M and N must be non-negative, got M={M}, N={N}")
    if not max(0, M - N) <= p <= M:
        raise DomainError(f"photon number p={p} outside [{max(0, M - N)}, {M}] for M={M}, N={N}")


def _weights(M: int, N: int) -> tuple[int, list[int]]:
    """(p_min, integer weights) with P(p) = w[p - p_min] / ((N+M+1) C(N+M, M))."""
    p_min = max(0, M - N)
    L = N + M + 1
    # C(L, M-p) by the recurrence C(L, k-1) = C(L, k) * k / (L - k + 1), walking p upward
    k = M - p_min
    c = math.comb(L, k)
    weights = []
    for p in range(p_min, M + 1):
        weights.append((1 + 2 * p + N - M) * c)
        if k > 0:
            c = c * k // (L - k + 1)
            k -= 1
    return p_min, weights


def emission_probability(M: int, N: int, p: int) -> Fraction:
    """Exact probability of detecting ``p`` photons."""
    _check(M, N, p)
    L = N + M + 1
    return Fraction((1 + 2 * p + N - M) * binomial_exact(L, M - p), L * binomial_exact(N + M, M))


def emission_probability_float(M: int, N: int, p: int) -> float:
    """Same quantity through log-factorials; usable for any M."""
    _check(M, N, p)
    log_p = (ln_factorial(M) + ln_factorial(N) + math.log(1 + 2 * p + N - M)
             - ln_factorial(M - p) - ln_factorial(1 + N + p))
    return math.exp(log_p)


@dataclass(frozen=True)
class EmissionDistribution:
    M: int
    N: int
    probs: tuple  # ((p, Fraction), ...)

    @property
    def p_min(self) -> int:
        return max(0, self.M - self.N)

    def gamma(self, p: int) -> Fraction:
        if self.M == 0:
            raise DomainError("gamma = p/M is undefined for M = 0")
        return Fraction(p, self.M)

    def as_dict(self) -> dict:
        return dict(self.probs)

    def prob(self, p: int) -> Fraction:
        """P(p), zero outside the allowed window."""
        return self.as_dict().get(p, Fraction(0))

    def total(self) -> Fraction:
        return sum((pr for _, pr in self.probs), Fraction(0))

    def expectation(self, fn) -> Fraction:
        return sum((pr * fn(p) for p, pr in self.probs), Fraction(0))

    def argmax(self) -> int:
        return max(self.probs, key=lambda t: t[1])[0]


def emission_distribution(M: int, N: int) -> EmissionDistribution:
    if M < 0 or N < 0 or M + N < 1:
        raise DomainError(f"need M, N >= 0 and M + N >= 1, got M={M}, N={N}")
    p_min, weights = _weights(M, N)
    denom = (N + M + 1) * binomial_exact(N + M, M)
    probs = tuple((p_min + i, Fraction(w, denom)) for i, w in enumerate(weights))
    return EmissionDistribution(M, N, probs)


def _p_moments(M: int, N: int) -> tuple[Fraction, Fraction]:
    """Exact mean and variance of the photon number."""
    p_min, weights = _weights(M, N)
    denom = (N + M + 1) * binomial_exact(N + M, M)
    s1 = s2 = 0
    for i, w in enumerate(weights):
        p = p_min + i
        s1 += p * w
        s2 += p * p * w
    mean = Fraction(s1, denom)
    return mean, Fraction(s2, denom) - mean * mean


def mean_gamma(M: int, N: int) -> float:
    if M < 1:
        raise DomainError("mean_gamma needs M >= 1")
    return float(_p_moments(M, N)[0] / M)


def variance_gamma(M: int, N: int) -> float:
    if M < 1:
        raise DomainError("variance_gamma needs M >= 1")
    return float(_p_moments(M, N)[1] / (M * M))


def gamma_moments_exact(M: int, N: int) -> tuple[Fraction, Fraction]:
    """(mean, variance) of gamma = p/M as exact rationals."""
    if M < 1:
        raise DomainError("gamma moments need M >= 1")
    mean, var = _p_moments(M, N)
    return mean / M, var / (M * M)


def spinon_stats(M: int, N: int) -> tuple[float, float, float]:
    """Mean, variance and mean/variance ratio of the unpaired-spin count.

    ``q = N - M + 2p``.  A deterministic count has zero variance and the
    ratio is reported as ``inf``.
    """
    if M < 1:
        raise DomainError("spinon_stats needs M >= 1")
    mean_p, var_p = _p_moments(M, N)
    q_bar = N - M + 2 * mean_p
    q_var = 4 * var_p
    ratio = math.inf if q_var == 0 else float(q_bar / q_var)
    return float(q_bar), float(q_var), ratio


# -- large-M approximations ------------------------------------------------

class Regime(enum.Enum):
    ALPHA_GT_1 = "alpha_gt_1"
    ALPHA_EQ_1 = "alpha_eq_1"
    ALPHA_LT_1 = "alpha_lt_1"

    @classmethod
    def for_alpha(cls, alpha) -> "Regime":
        alpha = as_fraction(alpha)
        if alpha > 1:
            return cls.ALPHA_GT_1
        if alpha == 1:
            return cls.ALPHA_EQ_1
        return cls.ALPHA_LT_1


def approx_distribution(regime, M: int, alpha, gamma: float) -> float:
    """Leading-order large-M form of P(gamma) for the given regime.

    alpha > 1: (alpha-1) exp(-M (alpha-1) gamma)
    alpha = 1: 2 gamma / (1 + gamma) exp(-M gamma^2)
    alpha < 1: g_c exp(-2 M g_c^2) exp(-3 M g_c (gamma - g_c)) above
               g_c = 1 - alpha, zero below it
    """
    regime = Regime(regime)
    alpha_q = as_fraction(alpha)
    if Regime.for_alpha(alpha_q) is not regime:
        raise DomainError(f"regime {regime.value} does not match alpha={alpha_q}")
    if not 0 <= gamma <= 1:
        raise DomainError(f"gamma={gamma} outside [0, 1]")
    a = float(alpha_q)
    if regime is Regime.ALPHA_GT_1:
        return (a - 1) * math.exp(-M * (a - 1) * gamma)
    if regime is Regime.ALPHA_EQ_1:
        return 2 * gamma / (1 + gamma) * math.exp(-M * gamma * gamma)
    gc = 1 - a
    if gamma < gc:
        return 0.0
    return gc * math.exp(-2 * M * gc * gc) * math.exp(-3 * M * gc * (gamma - gc))


@dataclass(frozen=True)
class AsymptoticCurve:
    regime: Regime
    M: int
    alpha: Fraction

    @classmethod
    def for_alpha(cls, M: int, alpha) -> "AsymptoticCurve":
        alpha = as_fraction(alpha)
        return cls(Regime.for_alpha(alpha), M, alpha)

    @property
    def gamma_c(self) -> float:
        if self.regime is not Regime.ALPHA_LT_1:
            raise DomainError("gamma_c only exists for alpha < 1")
        return float(1 - self.alpha)

    def __call__(self, gamma: float) -> float:
        return approx_distribution(self.regime, self.M, self.alpha, gamma)


def approx_peak_location(M: int) -> float:
    """Peak of the balanced-case curve, sqrt(1/(2M))."""
    if M < 1:
        raise DomainError("approx_peak_location needs M >= 1")
    return math.sqrt(1 / (2 * M))


def extrapolate_thermo(alpha) -> float:
    """M -> infinity limit of the mean emission fraction."""
    a = as_fraction(alpha)
    if a < 0:
        raise DomainError(f"alpha must be non-negative, got {alpha}")
    return 0.0 if a >= 1 else float(1 - a)


# -- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    alpha: Fraction
    M: int
    gamma_bar: float
    gamma_var: float
    q_bar: float
    q_var: float
    mean_var_ratio: float

    @property
    def N(self) -> int:
        return int(self.alpha * self.M)


def as_fraction(value) -> Fraction:
    """Exact rational from int, Fraction, decimal string or float (via its repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def sweep_point(M: int, alpha) -> SweepPoint:
    alpha = as_fraction(alpha)
    if M < 1:
        raise DomainError("sweeps need M >= 1")
    if alpha < 0:
        raise DomainError(f"alpha must be non-negative, got {alpha}")
    N = alpha * M
    if N.denominator != 1:
        raise DomainError(f"alpha={alpha} gives non-integer N = {N} for M={M}")
    N = int(N)
    mean_p, var_p = _p_moments(M, N)
    q_bar = N - M + 2 * mean_p
    q_var = 4 * var_p
    return SweepPoint(
        alpha=alpha,
        M=M,
        gamma_bar=float(mean_p / M),
        gamma_var=float(var_p / (M * M)),
        q_bar=float(q_bar),
        q_var=float(q_var),
        mean_var_ratio=math.inf if q_var == 0 else float(q_bar / q_var),
    )


def sweep_alpha(M: int, alpha_values, *, workers: int | None = None) -> list[SweepPoint]:
    """One :class:`SweepPoint` per alpha, in input order.

    Every ``alpha * M`` must be an integer.  ``workers > 1`` fans the points
    out over processes; ordering is unaffected.
    """
    alphas = [as_fraction(a) for a in alpha_values]
    for a in alphas:
        if (a * M).denominator != 1:
            raise DomainError(f"alpha={a} gives non-integer N = {a * M} for M={M}")
    if workers and workers > 1 and len(alphas) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(sweep_point, [M] * len(alphas), alphas))
    return [sweep_point(M, a) for a in alphas]
