import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rvb import algebra
from rvb.emission import emission_probability
from rvb.errors import CapacityError, DomainError, SymmetryError
from rvb.states import (
    PhaseMatch,
    StateVector,
    SystemShape,
    apply_lowering,
    apply_s_squared,
    apply_sz,
    collapsed_state,
    permute_sites,
    product_state,
    project_sector,
    row_schmidt,
    rvb_state,
    spin_correlation,
    states_equal_up_to_phase,
)

R2 = math.sqrt(0.5)


def basis_vector(shape, bits):
    """bits given in site order, '1' = up."""
    v = np.zeros(1 << shape.mu)
    v[sum(1 << i for i, b in enumerate(bits) if b == "1")] = 1.0
    return v


def singlet():
    sh = SystemShape(1, 1)
    return StateVector(sh, (basis_vector(sh, "10") - basis_vector(sh, "01")) * R2)


def all_valid(max_mu, min_mu=1):
    for mu in range(min_mu, max_mu + 1):
        for M in range(mu + 1):
            shape = SystemShape(M, mu - M)
            for p in shape.p_values:
                yield shape, p


def test_shape_derived_fields():
    sh = SystemShape(4, 6)
    assert sh.mu == 10
    assert sh.alpha == Fraction(3, 2)
    assert list(sh.p_values) == [0, 1, 2, 3, 4]
    assert list(SystemShape(5, 2).p_values) == [3, 4, 5]
    with pytest.raises(DomainError):
        SystemShape(0, 3).alpha


def test_product_state_examples():
    v = product_state(SystemShape(1, 1))
    assert v.amplitudes[0b01] == 1.0 and v.norm() == 1.0
    assert product_state(SystemShape(2, 0)).amplitudes[0b11] == 1.0
    assert product_state(SystemShape(2, 2)).m_tot() == 0


def test_product_state_capacity():
    with pytest.raises(CapacityError):
        product_state(SystemShape(11, 10))


def test_lowering_examples():
    sh = SystemShape(2, 0)
    up_up = StateVector(sh, basis_vector(sh, "11"))
    lowered = apply_lowering(up_up).amplitudes
    np.testing.assert_array_equal(lowered, basis_vector(sh, "01") + basis_vector(sh, "10"))
    down = StateVector(sh, basis_vector(sh, "00"))
    assert apply_lowering(down).norm() == 0.0
    triplet0 = StateVector(sh, (basis_vector(sh, "01") + basis_vector(sh, "10")) * R2)
    np.testing.assert_allclose(apply_lowering(triplet0).amplitudes, math.sqrt(2) * basis_vector(sh, "00"))


def test_s_squared_examples():
    s = singlet()
    assert apply_s_squared(s).norm() < 1e-15
    sh = SystemShape(2, 0)
    np.testing.assert_allclose(apply_s_squared(StateVector(sh, basis_vector(sh, "11"))).amplitudes,
                               2 * basis_vector(sh, "11"))


def test_s_squared_sector_weights_by_diagonalization():
    """Weights of |uudd> in each S sector from a dense eigendecomposition of S^2."""
    sh = SystemShape(2, 2)
    dim = 1 << sh.mu
    mat = np.column_stack([apply_s_squared(StateVector(sh, np.eye(dim)[k])).amplitudes for k in range(dim)])
    evals, evecs = np.linalg.eigh(mat)
    psi = product_state(sh).amplitudes
    weights = {}
    for ev, vec in zip(np.rint(evals).astype(int), evecs.T):
        weights[ev] = weights.get(ev, 0.0) + float(vec @ psi) ** 2
    assert weights[0] == pytest.approx(1 / 3)
    assert weights[2] == pytest.approx(1 / 2)
    assert weights[6] == pytest.approx(1 / 6)
    for S, w in [(0, 1 / 3), (1, 1 / 2), (2, 1 / 6)]:
        assert project_sector(product_state(sh), S).norm_squared() == pytest.approx(w, abs=1e-12)


def test_project_sector_examples():
    sh = SystemShape(1, 1)
    proj = project_sector(product_state(sh), 0)
    np.testing.assert_allclose(proj.amplitudes, (basis_vector(sh, "10") - basis_vector(sh, "01")) / 2, atol=1e-15)
    assert proj.norm_squared() == pytest.approx(0.5)


def test_project_sector_idempotent_and_eigen():
    sh = SystemShape(3, 4)
    for p in sh.p_values:
        S = Fraction(1, 2) + p
        once = project_sector(product_state(sh), S)
        twice = project_sector(once, S)
        assert np.max(np.abs(once.amplitudes - twice.amplitudes)) < 1e-9
        resid = apply_s_squared(once).amplitudes - float(S * (S + 1)) * once.amplitudes
        assert np.linalg.norm(resid) < 1e-9


def test_project_sector_rejects_bad_spin():
    sh = SystemShape(2, 2)
    with pytest.raises(DomainError):
        project_sector(product_state(sh), 3)
    with pytest.raises(DomainError):
        project_sector(product_state(sh), Fraction(1, 2))


def test_project_sector_norms_match_distribution():
    for mu in range(1, 13):
        for M in range(mu + 1):
            if M > 6 or mu - M > 6:
                continue
            sh = SystemShape(M, mu - M)
            for p in sh.p_values:
                w = project_sector(product_state(sh), Fraction(sh.N - M, 2) + p).norm_squared()
                assert w == pytest.approx(float(emission_probability(M, sh.N, p)), abs=1e-9)


def test_sector_completeness():
    for mu in range(1, 15):
        for M in range(mu + 1):
            sh = SystemShape(M, mu - M)
            psi = product_state(sh)
            total = sum(project_sector(psi, Fraction(sh.N - M, 2) + p).norm_squared() for p in sh.p_values)
            assert total == pytest.approx(1.0, abs=1e-10)


def test_collapsed_state_examples():
    s = collapsed_state(SystemShape(1, 1), 0)
    assert states_equal_up_to_phase(s, singlet(), 1e-12) is PhaseMatch.EQUAL_SAME_SIGN
    sh = SystemShape(1, 1)
    np.testing.assert_allclose(collapsed_state(sh, 1).amplitudes, basis_vector(sh, "00"), atol=1e-15)
    sh = SystemShape(2, 2)
    for p, unpaired in [(0, 0), (1, 2), (2, 4)]:
        c = collapsed_state(sh, p)
        s2 = c.inner(apply_s_squared(c))
        assert math.sqrt(1 + 4 * s2) - 1 == pytest.approx(unpaired)
        assert states_equal_up_to_phase(c, rvb_state(sh, p), 1e-9) is PhaseMatch.EQUAL_SAME_SIGN


def test_collapsed_state_domain():
    with pytest.raises(DomainError):
        collapsed_state(SystemShape(3, 1), 1)
    with pytest.raises(DomainError):
        collapsed_state(SystemShape(2, 2), 3)


def test_collapsed_weight_is_probability():
    sh = SystemShape(3, 5)
    for p in sh.p_values:
        _, w = collapsed_state(sh, p, return_weight=True)
        assert w == pytest.approx(float(emission_probability(3, 5, p)), abs=1e-12)


def test_degenerate_shapes():
    down = collapsed_state(SystemShape(0, 3), 0)
    assert down.amplitudes[0] == pytest.approx(1.0)
    up = SystemShape(3, 0)
    assert list(up.p_values) == [3]
    assert collapsed_state(up, 3).amplitudes[0] == pytest.approx(1.0)
    assert rvb_state(up, 3).amplitudes[0] == pytest.approx(1.0)


def test_rvb_examples():
    assert states_equal_up_to_phase(rvb_state(SystemShape(1, 1), 0), singlet(), 1e-12) is PhaseMatch.EQUAL_SAME_SIGN
    r = rvb_state(SystemShape(2, 3), 0)
    assert r.m_tot() == Fraction(-1, 2)
    assert r.inner(apply_s_squared(r)) == pytest.approx(0.75)


def brute_permutation_sum(shape, p):
    """Sum of the dimer product state over every in-row permutation, by itertools."""
    M, N = shape.M, shape.N
    dimers = np.zeros(1 << shape.mu)
    dimers[0] = 1.0
    for k in range(M - p):
        t, b = k, M + k
        new = np.zeros_like(dimers)
        for idx in np.flatnonzero(dimers):
            new[idx | (1 << t)] += dimers[idx] * R2
            new[idx | (1 << b)] -= dimers[idx] * R2
        dimers = new
    total = np.zeros_like(dimers)
    for top in itertools.permutations(range(M)):
        for bottom in itertools.permutations(range(M, M + N)):
            total += permute_sites(StateVector(shape, dimers), list(top) + list(bottom)).amplitudes
    return total


@pytest.mark.parametrize("M,N", [(1, 1), (2, 2), (2, 3), (3, 2), (3, 3), (1, 3), (3, 1)])
def test_rvb_and_delta_against_brute_permutations(M, N):
    shape = SystemShape(M, N)
    for p in shape.p_values:
        total = brute_permutation_sum(shape, p)
        delta = float(algebra.delta_norm(M, N, p))
        assert np.linalg.norm(total) == pytest.approx(delta, rel=1e-12)
        np.testing.assert_allclose(rvb_state(shape, p).amplitudes, total / delta, atol=1e-12)
        np.testing.assert_allclose(rvb_state(shape, p, method="closed_form").amplitudes, total / delta, atol=1e-12)


def test_delta_normalizes_two_by_two():
    shape = SystemShape(2, 2)
    unnorm = brute_permutation_sum(shape, 0)
    assert np.linalg.norm(unnorm) ** 2 == pytest.approx(12.0)
    assert rvb_state(shape, 0, method="closed_form").norm() == pytest.approx(1.0, abs=1e-12)


def test_rvb_independent_of_dimer_placement():
    rng = np.random.default_rng(3)
    for M, N, p in [(3, 3, 0), (3, 4, 1), (4, 3, 1), (4, 5, 2)]:
        shape = SystemShape(M, N)
        default = rvb_state(shape, p)
        for _ in range(3):
            tops = rng.permutation(M)[: M - p]
            bottoms = M + rng.permutation(N)[: M - p]
            other = rvb_state(shape, p, pairs=list(zip(tops.tolist(), bottoms.tolist())))
            assert states_equal_up_to_phase(default, other, 1e-12) is PhaseMatch.EQUAL_SAME_SIGN


def test_rvb_bad_pairs():
    with pytest.raises(DomainError):
        rvb_state(SystemShape(2, 2), 0, pairs=[(0, 2), (0, 3)])
    with pytest.raises(DomainError):
        rvb_state(SystemShape(2, 2), 0, pairs=[(0, 1), (2, 3)])


def test_collapse_equals_rvb_small():
    for shape, p in all_valid(10):
        assert states_equal_up_to_phase(collapsed_state(shape, p), rvb_state(shape, p), 1e-9) \
            is PhaseMatch.EQUAL_SAME_SIGN, (shape, p)


def test_row_schmidt_singlet():
    rs = row_schmidt(rvb_state(SystemShape(1, 1), 0))
    assert rs.p == 0
    d = rs.as_dict()
    assert d[0] == pytest.approx(R2) and d[1] == pytest.approx(-R2)
    assert rs.total_weight() == pytest.approx(1.0, abs=1e-10)


def test_row_schmidt_matches_e_lambda():
    for M in range(7):
        for N in range(7):
            if M + N == 0:
                continue
            shape = SystemShape(M, N)
            for p in shape.p_values:
                rs = row_schmidt(collapsed_state(shape, p))
                assert rs.p == p
                assert rs.total_weight() == pytest.approx(1.0, abs=1e-10)
                for lam, value in rs.coefficients:
                    assert value == pytest.approx(float(algebra.e_lambda(M, N, p, lam)), abs=1e-9)


def test_row_schmidt_rejects_asymmetric_state():
    sh = SystemShape(2, 2)
    with pytest.raises(SymmetryError):
        row_schmidt(StateVector(sh, basis_vector(sh, "1010")))


def test_in_row_transposition_symmetry():
    for shape, p in all_valid(9):
        for state in (collapsed_state(shape, p), rvb_state(shape, p)):
            for row in (shape.top_sites, shape.bottom_sites):
                for a, b in itertools.combinations(row, 2):
                    perm = list(range(shape.mu))
                    perm[a], perm[b] = b, a
                    moved = permute_sites(state, perm)
                    assert np.max(np.abs(moved.amplitudes - state.amplitudes)) < 1e-10


def test_quantum_numbers_of_collapsed_states():
    for shape, p in all_valid(12):
        c = collapsed_state(shape, p)
        S = Fraction(shape.N - shape.M, 2) + p
        m = Fraction(shape.M - shape.N, 2) - p
        assert np.linalg.norm(apply_s_squared(c).amplitudes - float(S * (S + 1)) * c.amplitudes) <= 1e-9
        assert np.linalg.norm(apply_sz(c).amplitudes - float(m) * c.amplitudes) <= 1e-9


def test_dark_state_contract():
    for shape, p in all_valid(10):
        c = collapsed_state(shape, p)
        S = Fraction(shape.N - shape.M, 2) + p
        m = Fraction(shape.M - shape.N, 2) - p
        steps = int(m + S)
        v = c
        for _ in range(steps):
            v = apply_lowering(v)
        assert v.norm() > 1e-9
        assert v.normalized().m_tot() == -S
        assert apply_lowering(v).norm() <= 1e-9


def test_spin_correlation_examples():
    assert spin_correlation(singlet(), 0, 1) == pytest.approx(-0.75)
    sh = SystemShape(1, 1)
    assert spin_correlation(StateVector(sh, basis_vector(sh, "00")), 0, 1) == pytest.approx(0.25)
    r = rvb_state(SystemShape(2, 2), 0)
    total = sum(spin_correlation(r, i, j) for i in range(4) for j in range(4) if i != j)
    assert total == pytest.approx(-3.0)
    with pytest.raises(DomainError):
        spin_correlation(r, 1, 1)
    with pytest.raises(DomainError):
        spin_correlation(r, 0, 4)


def test_correlation_sum_rule():
    for shape, p in all_valid(8):
        c = collapsed_state(shape, p)
        S = Fraction(shape.N - shape.M, 2) + p
        total = sum(spin_correlation(c, i, j) for i in range(shape.mu) for j in range(shape.mu) if i != j)
        assert total == pytest.approx(float(S * (S + 1)) - 0.75 * shape.mu, abs=1e-9)


def test_states_equal_up_to_phase_examples():
    v = rvb_state(SystemShape(2, 2), 1)
    assert states_equal_up_to_phase(v, v, 1e-12) is PhaseMatch.EQUAL_SAME_SIGN
    assert states_equal_up_to_phase(v, -v, 1e-12) is PhaseMatch.EQUAL_OPPOSITE_SIGN
    sh = SystemShape(1, 1)
    assert states_equal_up_to_phase(singlet(), StateVector(sh, basis_vector(sh, "00")), 1e-9) is PhaseMatch.NOT_EQUAL


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_collapsed_states_mutually_orthogonal(M, N, data):
    shape = SystemShape(M, N)
    ps = list(shape.p_values)
    p, q = data.draw(st.sampled_from(ps)), data.draw(st.sampled_from(ps))
    overlap = collapsed_state(shape, p).inner(collapsed_state(shape, q))
    assert overlap == pytest.approx(1.0 if p == q else 0.0, abs=1e-9)


def test_large_register_collapse_stays_in_sector():
    shape = SystemShape(9, 9)
    for p in (0, 4, 9):
        c = collapsed_state(shape, p)
        assert c.norm() == pytest.approx(1.0, abs=1e-10)
        assert states_equal_up_to_phase(c, rvb_state(shape, p), 1e-9) is PhaseMatch.EQUAL_SAME_SIGN
