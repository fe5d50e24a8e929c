"""Dense state vectors for a two-row register of spin-1/2 sites.

Sites ``0..M-1`` form the top row (initially up), sites ``M..M+N-1`` the
bottom row (initially down).  Basis index bit ``i`` set means site ``i`` is
up.  Amplitudes are real float64; exact values live in :mod:`rvb.algebra`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import algebra
from .algebra import HalfInteger
from .errors import CapacityError, DomainError, SymmetryError

MAX_SITES = 20

__all__ = [
    "MAX_SITES",
    "SystemShape",
    "StateVector",
    "RowSchmidt",
    "PhaseMatch",
    "product_state",
    "apply_lowering",
    "apply_raising",
    "apply_sz",
    "apply_s_squared",
    "project_sector",
    "collapsed_state",
    "rvb_state",
    "row_schmidt",
    "spin_correlation",
    "states_equal_up_to_phase",
    "permute_sites",
]


@dataclass(frozen=True)
class SystemShape:
    M: int
    N: int

    def __post_init__(self):
        if self.M < 0 or self.N < 0:
            raise DomainError(f"M and N must be non-negative, got M={self.M}, N={self.N}")

    @property
    def mu(self) -> int:
        return self.M + self.N

    @property
    def alpha(self) -> Fraction:
        if self.M == 0:
            raise DomainError("alpha = N/M is undefined for M = 0")
        return Fraction(self.N, self.M)

    @property
    def p_min(self) -> int:
        return max(0, self.M - self.N)

    @property
    def p_values(self) -> range:
        return range(self.p_min, self.M + 1)

    @property
    def top_sites(self) -> range:
        return range(self.M)

    @property
    def bottom_sites(self) -> range:
        return range(self.M, self.mu)

    def check_p(self, p: int):
        if not self.p_min <= p <= self.M:
            raise DomainError(f"photon number p={p} outside [{self.p_min}, {self.M}] for M={self.M}, N={self.N}")

    def check_capacity(self, limit: int = MAX_SITES):
        if self.mu > limit:
            raise CapacityError(f"mu = M+N = {self.mu} exceeds the dense-storage limit {limit}")


@dataclass(frozen=True, eq=False)
class StateVector:
    shape: SystemShape
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        if amps.shape != (1 << self.shape.mu,):
            raise ValueError(f"expected {1 << self.shape.mu} amplitudes, got {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def norm_squared(self) -> float:
        return float(self.amplitudes @ self.amplitudes)

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise DomainError("cannot normalize the zero vector")
        return StateVector(self.shape, self.amplitudes / n)

    def inner(self, other: "StateVector") -> float:
        return float(self.amplitudes @ other.amplitudes)

    def __neg__(self):
        return StateVector(self.shape, -self.amplitudes)

    def __sub__(self, other):
        return StateVector(self.shape, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar):
        return StateVector(self.shape, self.amplitudes * scalar)

    __rmul__ = __mul__

    def m_tot(self, tol: float = 1e-12) -> Fraction:
        """Definite S^z eigenvalue; raises if the state mixes m sectors."""
        support = np.flatnonzero(np.abs(self.amplitudes) > tol)
        if support.size == 0:
            raise DomainError("zero vector has no definite m_tot")
        ups = set(_popcount(support).tolist())
        if len(ups) != 1:
            raise DomainError("state does not have a definite m_tot")
        return Fraction(2 * ups.pop() - self.shape.mu, 2)

    def nonzero(self, tol: float = 0.0):
        """(index, amplitude) pairs with ``|amplitude| > tol`` in index order."""
        idx = np.flatnonzero(np.abs(self.amplitudes) > tol)
        return [(int(i), float(self.amplitudes[i])) for i in idx]

    def bitstring(self, index: int) -> str:
        """Basis label in site order, ``1`` for up."""
        return "".join("1" if (index >> i) & 1 else "0" for i in range(self.shape.mu))


@dataclass(frozen=True)
class RowSchmidt:
    p: int
    coefficients: tuple  # ((lambda, value), ...)

    def as_dict(self) -> dict:
        return dict(self.coefficients)

    def total_weight(self) -> float:
        return math.fsum(v * v for _, v in self.coefficients)


class PhaseMatch(enum.Enum):
    EQUAL_SAME_SIGN = "equal_same_sign"
    EQUAL_OPPOSITE_SIGN = "equal_opposite_sign"
    NOT_EQUAL = "not_equal"


# -- basis helpers -------------------------------------------------------------

_index_cache: dict = {}


def _indices(mu: int) -> np.ndarray:
    idx = _index_cache.get(mu)
    if idx is None:
        idx = np.arange(1 << mu, dtype=np.int64)
        idx.setflags(write=False)
        _index_cache[mu] = idx
    return idx


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


_popcount_cache: dict = {}


def _popcounts(mu: int) -> np.ndarray:
    pc = _popcount_cache.get(mu)
    if pc is None:
        pc = _popcount(_indices(mu))
        pc.setflags(write=False)
        _popcount_cache[mu] = pc
    return pc


def _row_counts(shape: SystemShape):
    """Number of up spins in the top and bottom row for every basis index."""
    idx = _indices(shape.mu)
    top_mask = (1 << shape.M) - 1
    return _popcount(idx & top_mask), _popcount(idx >> shape.M)


# -- operators -----------------------------------------------------------------

def product_state(shape: SystemShape) -> StateVector:
    """Top row all up, bottom row all down."""
    shape.check_capacity()
    amps = np.zeros(1 << shape.mu)
    amps[(1 << shape.M) - 1] = 1.0
    return StateVector(shape, amps)


def _lower(amps: np.ndarray, mu: int) -> np.ndarray:
    idx = _indices(mu)
    out = np.zeros_like(amps)
    for i in range(mu):
        bit = 1 << i
        up = (idx & bit) != 0
        out[idx[up] ^ bit] += amps[up]
    return out


def _raise(amps: np.ndarray, mu: int) -> np.ndarray:
    idx = _indices(mu)
    out = np.zeros_like(amps)
    for i in range(mu):
        bit = 1 << i
        down = (idx & bit) == 0
        out[idx[down] | bit] += amps[down]
    return out


def _sz_diag(mu: int) -> np.ndarray:
    return _popcounts(mu) - mu / 2


def _s_squared(amps: np.ndarray, mu: int) -> np.ndarray:
    sz = _sz_diag(mu)
    return _lower(_raise(amps, mu), mu) + sz * (sz + 1) * amps


def apply_lowering(state: StateVector) -> StateVector:
    """Collective S^- (not normalized)."""
    return StateVector(state.shape, _lower(state.amplitudes, state.shape.mu))


def apply_raising(state: StateVector) -> StateVector:
    """Collective S^+ (not normalized)."""
    return StateVector(state.shape, _raise(state.amplitudes, state.shape.mu))


def apply_sz(state: StateVector) -> StateVector:
    return StateVector(state.shape, _sz_diag(state.shape.mu) * state.amplitudes)


def apply_s_squared(state: StateVector) -> StateVector:
    """Total spin squared via S^2 = S^- S^+ + S^z (S^z + 1)."""
    return StateVector(state.shape, _s_squared(state.amplitudes, state.shape.mu))


def project_sector(state: StateVector, S) -> StateVector:
    """Project onto total spin ``S`` with the Lowdin polynomial in S^2.

    The input must have a definite m_tot; the result is not normalized.
    """
    S = HalfInteger.of(S)
    mu = state.shape.mu
    m = state.m_tot()
    twice_m = abs(int(2 * m))
    if not twice_m <= S.twice_value <= mu or (S.twice_value - twice_m) % 2:
        raise DomainError(f"S={S} not an allowed total spin for |m_tot|={abs(m)} on {mu} sites")
    s = S.value
    target = s * (s + 1)
    amps = state.amplitudes.copy()
    # largest S' first keeps intermediate magnitudes bounded
    for twice_other in range(mu, twice_m - 1, -2):
        if twice_other == S.twice_value:
            continue
        o = Fraction(twice_other, 2)
        ev = float(o * (o + 1))
        amps = (_s_squared(amps, mu) - ev * amps) / float(target - o * (o + 1))
    return StateVector(state.shape, amps)


def _sector_residual(amps: np.ndarray, mu: int, S: Fraction) -> float:
    return float(np.linalg.norm(_s_squared(amps, mu) - float(S * (S + 1)) * amps))


def collapsed_state(shape: SystemShape, p: int, *, return_weight: bool = False):
    """Spin state left behind after ``p`` photons are detected.

    Projects the product state onto ``S = (N-M)/2 + p``, lowers ``p`` times and
    normalizes.  With ``return_weight`` the squared norm of the projection
    (the probability of this outcome) is returned alongside.

    Lowering commutes with S^2, so it is done before projecting: leakage into
    other sectors would otherwise be amplified by the ladder factors.
    """
    shape.check_p(p)
    shape.check_capacity()
    S = Fraction(shape.N - shape.M, 2) + p
    m = Fraction(shape.M - shape.N, 2)
    amps = product_state(shape).amplitudes
    for _ in range(p):
        amps = _lower(amps, shape.mu)
    amps = project_sector(StateVector(shape, amps), S).amplitudes
    ladder = 1
    for k in range(p):
        ladder *= (S + m - k) * (S - m + k + 1)
    weight = float(amps @ amps) / float(ladder)
    amps = amps / np.linalg.norm(amps)
    if _sector_residual(amps, shape.mu, S) > 1e-9:
        raise ArithmeticError(f"collapsed state for {shape}, p={p} left the S={S} sector")
    out = StateVector(shape, amps)
    expected_m = Fraction(shape.M - shape.N, 2) - p
    if out.m_tot(tol=1e-12) != expected_m:
        raise ArithmeticError(f"collapsed state for {shape}, p={p} has wrong m_tot")
    return (out, weight) if return_weight else out


def _symmetrize_rows(amps: np.ndarray, shape: SystemShape) -> np.ndarray:
    """Sum of the vector over all in-row permutations of both rows.

    A basis state x with k top ups and l bottom ups is hit by every element of
    the orbit of x; each orbit member contributes ``|Stab(x)|`` times.
    """
    top, bottom = _row_counts(shape)
    M, N = shape.M, shape.N
    key = top * (N + 1) + bottom
    orbit_sum = np.bincount(key, weights=amps, minlength=(M + 1) * (N + 1))
    f = math.factorial
    stab = np.array([float(f(k) * f(M - k) * f(l) * f(N - l))
                     for k in range(M + 1) for l in range(N + 1)])
    return (stab * orbit_sum)[key]


def rvb_state(shape: SystemShape, p: int, *, pairs=None, method: str = "construct") -> StateVector:
    """Two-row RVB state with ``M-p`` inter-row dimers and all other spins down.

    ``method="construct"`` places ordered singlets (top spin first) on
    ``pairs`` (default: top site k with bottom site M+k), sets unpaired spins
    down, sums over all in-row permutations and normalizes.
    ``method="closed_form"`` evaluates the grouped expansion over the number
    of down spins in the top row, normalized by :func:`rvb.algebra.delta_norm`
    (no numerical renormalization).
    """
    shape.check_p(p)
    shape.check_capacity()
    if method == "construct":
        amps = _symmetrize_rows(_dimer_product(shape, p, pairs), shape)
        norm = np.linalg.norm(amps)
        return StateVector(shape, amps / norm)
    if method == "closed_form":
        if pairs is not None:
            raise ValueError("pairs only applies to method='construct'")
        return _rvb_closed_form(shape, p)
    raise ValueError(f"unknown method {method!r}")


def _dimer_product(shape: SystemShape, p: int, pairs=None) -> np.ndarray:
    M, N, mu = shape.M, shape.N, shape.mu
    n_dimers = M - p
    if pairs is None:
        pairs = [(k, M + k) for k in range(n_dimers)]
    pairs = [tuple(pr) for pr in pairs]
    if len(pairs) != n_dimers:
        raise DomainError(f"need exactly {n_dimers} dimers, got {len(pairs)}")
    used = [s for pr in pairs for s in pr]
    if len(set(used)) != len(used):
        raise DomainError("a site appears in more than one dimer")
    for t, b in pairs:
        if not (0 <= t < M and M <= b < mu):
            raise DomainError(f"dimer {(t, b)} must join a top site to a bottom site")
    amps = np.zeros(1 << mu)
    amps[0] = 1.0  # all down
    for t, b in pairs:
        # dimer (|up_t down_b> - |down_t up_b>)/sqrt(2) on sites that are currently down
        new = np.zeros_like(amps)
        nz = np.flatnonzero(amps)
        new[nz | (1 << t)] += amps[nz]
        new[nz | (1 << b)] -= amps[nz]
        amps = new / math.sqrt(2)
    return amps


def _rvb_closed_form(shape: SystemShape, p: int) -> StateVector:
    M, N = shape.M, shape.N
    top, bottom = _row_counts(shape)
    f = algebra.factorial_exact
    delta = float(algebra.delta_norm(M, N, p))
    amps = np.zeros(1 << shape.mu)
    for kappa in range(p, min(M, N + p) + 1):
        # permutation sums count each distinct arrangement (M-k)!k! and (k-p)!(N+p-k)! times
        coeff = (
            (-1) ** (kappa - p) * algebra.binomial_exact(M - p, kappa - p)
            * f(M - kappa) * f(kappa) * f(kappa - p) * f(N + p - kappa)
        )
        value = float(algebra.SqrtRational.from_rational(coeff)
                      * algebra.SqrtRational(1, Fraction(1, 2 ** (M - p))))
        sel = (top == M - kappa) & (bottom == kappa - p)
        amps[sel] = value / delta
    return StateVector(shape, amps)


def row_schmidt(state: StateVector, shape: SystemShape | None = None, *, tol: float = 1e-9) -> RowSchmidt:
    """Coefficients on products of fully symmetric row states.

    ``c[lam]`` multiplies ``|M/2, M/2-lam>_top (x) |N/2, lam-N/2-p>_bottom``;
    the row states carry equal positive amplitudes on every arrangement.
    """
    shape = shape or state.shape
    if shape != state.shape:
        raise DomainError("shape does not match the state")
    M, N = shape.M, shape.N
    ups = int(state.m_tot() + Fraction(shape.mu, 2))
    p = M - ups
    top, bottom = _row_counts(shape)
    amps = state.amplitudes
    coefficients = []
    for lam in range(max(0, p), min(M, N + p) + 1):
        sel = (top == M - lam) & (bottom == lam - p)
        block = amps[sel]
        if block.size and np.ptp(block) > tol:
            raise SymmetryError(f"state is not invariant under in-row permutations (block lambda={lam})")
        norm = math.sqrt(algebra.binomial_exact(M, lam) * algebra.binomial_exact(N, lam - p))
        coefficients.append((lam, float(block.sum()) / norm))
    captured = math.fsum(v * v for _, v in coefficients)
    if abs(captured - state.norm_squared()) > tol:
        raise SymmetryError("state has weight outside the symmetric row sectors")
    return RowSchmidt(p, tuple(coefficients))


def spin_correlation(state: StateVector, i: int, j: int) -> float:
    """<S_i . S_j> for a normalized real state."""
    mu = state.shape.mu
    if i == j:
        raise DomainError("spin_correlation needs two distinct sites")
    for s in (i, j):
        if not 0 <= s < mu:
            raise DomainError(f"site {s} outside [0, {mu})")
    idx = _indices(mu)
    amps = state.amplitudes
    bi = (idx >> i) & 1
    bj = (idx >> j) & 1
    zz = 0.25 * float(np.sum(amps * amps * np.where(bi == bj, 1.0, -1.0)))
    differ = bi != bj
    flip = idx[differ] ^ ((1 << i) | (1 << j))
    # S+_i S-_j + S-_i S+_j maps each antiparallel configuration to its swap
    xy = 0.5 * float(np.sum(amps[differ] * amps[flip]))
    return zz + xy


def states_equal_up_to_phase(a: StateVector, b: StateVector, tol: float) -> PhaseMatch:
    """Compare after making each vector's largest-magnitude amplitude positive."""
    if a.shape != b.shape:
        raise DomainError("states have different shapes")
    va, vb = a.amplitudes, b.amplitudes
    mag = np.abs(va)
    # shared pivot: first entry within tol of the maximum, so ties cannot pick different entries
    pivot = int(np.argmax(mag >= mag.max() - tol)) if mag.size else 0
    sa = np.sign(va[pivot]) or 1.0
    sb = np.sign(vb[pivot]) or 1.0
    if np.max(np.abs(sa * va - sb * vb), initial=0.0) > tol:
        return PhaseMatch.NOT_EQUAL
    if np.max(np.abs(va - vb), initial=0.0) <= tol:
        return PhaseMatch.EQUAL_SAME_SIGN
    return PhaseMatch.EQUAL_OPPOSITE_SIGN


def permute_sites(state: StateVector, perm) -> StateVector:
    """Relabel sites: the spin on site ``i`` moves to site ``perm[i]``."""
    mu = state.shape.mu
    perm = list(perm)
    if sorted(perm) != list(range(mu)):
        raise DomainError("perm must be a permutation of the sites")
    idx = _indices(mu)
    target = np.zeros_like(idx)
    for i, pi in enumerate(perm):
        target |= ((idx >> i) & 1) << pi
    out = np.zeros_like(state.amplitudes)
    out[target] = state.amplitudes
    return StateVector(state.shape, out)
