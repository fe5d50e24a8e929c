"""Measurement and non-measurement protocols.

Detecting photons samples the count ``p`` from the exact distribution and
leaves the collapsed state for that ``p``; letting photons escape undetected
leaves the orthogonal mixture of all collapsed states weighted by their
probabilities.  :func:`brute_force_sector_weights` recomputes those weights
by diagonalizing S^2 directly and is kept free of the projector code.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from .emission import emission_distribution, emission_probability
from .errors import CapacityError, DomainError
from .states import (
    StateVector,
    SystemShape,
    apply_s_squared,
    apply_sz,
    collapsed_state,
    spin_correlation,
)

__all__ = [
    "CollapseOutcome",
    "CollapseEnsemble",
    "SampleReport",
    "sample_collapse",
    "mixed_state_ensemble",
    "ensemble_observable",
    "brute_force_sector_weights",
    "chi_square_test",
    "unpaired_spins",
]

SHARD_SIZE = 1 << 18
BRUTE_FORCE_MAX_SITES = 14


@dataclass(frozen=True)
class CollapseOutcome:
    p: int
    probability: float
    state: StateVector


@dataclass(frozen=True)
class CollapseEnsemble:
    shape: SystemShape
    outcomes: tuple

    def total_probability(self) -> float:
        return math.fsum(o.probability for o in self.outcomes)

    def purity(self) -> float:
        """Tr(rho^2) including cross overlaps between components."""
        total = 0.0
        for a in self.outcomes:
            for b in self.outcomes:
                total += a.probability * b.probability * a.state.inner(b.state) ** 2
        return total

    def max_overlap(self) -> float:
        """Largest |<psi_p|psi_p'>| over distinct components."""
        worst = 0.0
        for i, a in enumerate(self.outcomes):
            for b in self.outcomes[i + 1:]:
                worst = max(worst, abs(a.state.inner(b.state)))
        return worst


@dataclass(frozen=True)
class SampleReport:
    M: int
    N: int
    shots: int
    seed: int
    counts: dict = field(default_factory=dict)  # p -> count over p_min..M
    chi_square: float = 0.0
    dof: int = 0
    p_value_bound: float = 1.0

    def as_dict(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "shots": self.shots,
            "seed": self.seed,
            "counts": {str(p): c for p, c in sorted(self.counts.items())},
            "chi_square": self.chi_square,
            "dof": self.dof,
            "p_value_bound": self.p_value_bound,
        }


def _merge_bins(expected, observed, mode_index, minimum=5.0):
    """Fold low-expectation bins into their neighbour on the side of the mode."""
    exp = list(expected)
    obs = list(observed)
    # from the left edge toward the mode
    i = 0
    while i < mode_index and exp[i] < minimum:
        exp[i + 1] += exp[i]
        obs[i + 1] += obs[i]
        exp[i] = obs[i] = None
        i += 1
    j = len(exp) - 1
    while j > mode_index and exp[j] < minimum:
        exp[j - 1] += exp[j]
        obs[j - 1] += obs[j]
        exp[j] = obs[j] = None
        j -= 1
    keep = [k for k in range(len(exp)) if exp[k] is not None]
    return [exp[k] for k in keep], [obs[k] for k in keep]


def chi_square_test(probs, counts) -> tuple[float, int, float]:
    """Pearson statistic, degrees of freedom and p-value after bin merging."""
    probs = [float(x) for x in probs]
    counts = [int(c) for c in counts]
    shots = sum(counts)
    expected = [shots * x for x in probs]
    mode_index = int(np.argmax(probs))
    exp, obs = _merge_bins(expected, counts, mode_index)
    if len(exp) < 2:
        return 0.0, 0, 1.0
    chi2 = math.fsum((o - e) ** 2 / e for o, e in zip(obs, exp))
    dof = len(exp) - 1
    return chi2, dof, float(stats.chi2.sf(chi2, dof))


def _sample_shard(cdf: np.ndarray, n: int, seed: int, shard: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, shard])))
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="right")
    return np.bincount(np.minimum(idx, len(cdf) - 1), minlength=len(cdf))


def sample_collapse(shape: SystemShape, shots: int, seed: int, *, workers: int | None = None) -> SampleReport:
    """Draw ``shots`` photon counts from the exact distribution.

    Shots are split into fixed-size shards; shard ``i`` draws from a PCG64
    stream seeded by ``(seed, i)``, so the histogram depends only on
    ``(shape, shots, seed)`` and not on ``workers``.
    """
    if shots < 1:
        raise DomainError("shots must be >= 1")
    if shape.M < 1:
        raise DomainError("sampling needs M >= 1")
    if not 0 <= seed < 2 ** 64:
        raise DomainError("seed must be an unsigned 64-bit integer")
    dist = emission_distribution(shape.M, shape.N)
    ps = [p for p, _ in dist.probs]
    probs = [pr for _, pr in dist.probs]
    # exact rational CDF, converted once
    running = Fraction(0)
    cdf = []
    for pr in probs:
        running += pr
        cdf.append(float(running))
    cdf = np.array(cdf)
    sizes = [SHARD_SIZE] * (shots // SHARD_SIZE)
    if shots % SHARD_SIZE:
        sizes.append(shots % SHARD_SIZE)
    jobs = [(cdf, n, seed, i) for i, n in enumerate(sizes)]
    if workers and workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _sample_shard(*a), jobs))
    else:
        parts = [_sample_shard(*a) for a in jobs]
    hist = np.sum(parts, axis=0)
    counts = {p: int(c) for p, c in zip(ps, hist)}
    chi2, dof, pval = chi_square_test(probs, hist)
    return SampleReport(shape.M, shape.N, shots, seed, counts, chi2, dof, pval)


def mixed_state_ensemble(shape: SystemShape) -> CollapseEnsemble:
    """Photon-traced spin state as weighted orthogonal collapsed states."""
    shape.check_capacity()
    outcomes = tuple(
        CollapseOutcome(p, float(emission_probability(shape.M, shape.N, p)), collapsed_state(shape, p))
        for p in shape.p_values
    )
    return CollapseEnsemble(shape, outcomes)


def unpaired_spins(state: StateVector) -> float:
    """Unpaired-spin count 2*S_tot read off from <S^2>."""
    s2 = state.inner(apply_s_squared(state))
    return math.sqrt(1 + 4 * s2) - 1


def ensemble_observable(ensemble: CollapseEnsemble, observable: str, i: int | None = None,
                        j: int | None = None) -> float:
    """Mixture expectation of ``"q_count"``, ``"s_tot_z"`` or ``"spin_correlation"``.

    ``spin_correlation`` needs the two sites ``i`` and ``j``.
    """
    M, N = ensemble.shape.M, ensemble.shape.N
    if observable == "q_count":
        values = [N - M + 2 * o.p for o in ensemble.outcomes]
    elif observable == "s_tot_z":
        values = [o.state.inner(apply_sz(o.state)) for o in ensemble.outcomes]
    elif observable == "spin_correlation":
        if i is None or j is None:
            raise DomainError("spin_correlation needs sites i and j")
        values = [spin_correlation(o.state, i, j) for o in ensemble.outcomes]
    else:
        raise DomainError(f"unknown observable {observable!r}")
    return math.fsum(o.probability * v for o, v in zip(ensemble.outcomes, values))


def _s_squared_block(shape: SystemShape):
    """Dense S^2 on the sector with M up spins, plus its basis."""
    mu, M = shape.mu, shape.M
    all_idx = np.arange(1 << mu, dtype=np.int64)
    ups = np.zeros_like(all_idx)
    for i in range(mu):
        ups += (all_idx >> i) & 1
    basis = all_idx[ups == M]
    lookup = np.full(1 << mu, -1, dtype=np.int64)
    lookup[basis] = np.arange(basis.size)
    dim = basis.size
    mat = np.zeros((dim, dim))
    rows = np.arange(dim)
    # S^2 = 3mu/4 + 2 sum_{i<j} (Sz_i Sz_j + (S+_i S-_j + S-_i S+_j)/2)
    diag = np.full(dim, 0.75 * mu)
    for i in range(mu):
        bi = (basis >> i) & 1
        for j in range(i + 1, mu):
            bj = (basis >> j) & 1
            same = bi == bj
            diag += np.where(same, 0.5, -0.5)
            differ = ~same
            swapped = lookup[basis[differ] ^ ((1 << i) | (1 << j))]
            mat[rows[differ], swapped] += 1.0
    mat[rows, rows] += diag
    return basis, mat


def brute_force_sector_weights(shape: SystemShape) -> list[tuple[Fraction, float]]:
    """Weights of the product state in each S_tot eigenspace by full diagonalization."""
    if shape.mu > BRUTE_FORCE_MAX_SITES:
        raise CapacityError(f"brute force limited to mu <= {BRUTE_FORCE_MAX_SITES}, got {shape.mu}")
    if shape.mu == 0:
        raise DomainError("empty register")
    basis, mat = _s_squared_block(shape)
    evals, evecs = np.linalg.eigh(mat)
    start = int(np.searchsorted(basis, (1 << shape.M) - 1))
    overlaps = evecs[start, :] ** 2
    twice_s = np.rint(np.sqrt(1 + 4 * evals) - 1).astype(int)
    weights = {}
    for ts, w in zip(twice_s, overlaps):
        weights[ts] = weights.get(ts, 0.0) + float(w)
    return [(Fraction(ts, 2), weights[ts]) for ts in sorted(weights)]
