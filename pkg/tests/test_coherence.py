import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherelab import dictionary as dct
from coherelab.coherence import (CoherenceProfile, coherence, cumulative_coherence, gram,
                                 profile, ric_upper_bound, verify_norm_gap,
                                 verify_polytope_bound, verify_quasi_isometry,
                                 verify_restricted_orthogonality)
from coherelab.errors import DomainError, RangeError

from oracles import coherence_bruteforce, mu1_bruteforce, ric_bruteforce

BETA = 1.0 / (4.0 * math.sqrt(3.0) + 1.0)


def test_gram_identity_and_hermitian():
    np.testing.assert_allclose(gram(dct.identity(4)), np.eye(4))
    G = gram(dct.gaussian(4, 6, 3))
    np.testing.assert_allclose(G, G.conj().T, atol=1e-12)
    np.testing.assert_allclose(np.diag(G), 1.0, atol=1e-12)
    assert G.dtype == np.float64
    Gf = gram(dct.dirac_fourier(4))
    np.testing.assert_array_equal(Gf, Gf.conj().T)


def test_gram_hadamard_moduli():
    G = np.abs(gram(dct.dirac_hadamard(4)))
    np.fill_diagonal(G, 0)
    vals = np.unique(np.round(G, 12))
    assert set(vals.tolist()) <= {0.0, 0.5}


def test_coherence_examples():
    assert coherence(dct.identity(5)) == 0.0
    D = dct.gaussian(4, 6, 3)
    assert coherence(D) == pytest.approx(coherence_bruteforce(D.matrix), abs=1e-14)
    with pytest.raises(DomainError):
        coherence(dct.identity(1))


@pytest.mark.parametrize("s", [1, 2, 3, 4])
def test_identity_profile_zero(s):
    assert cumulative_coherence(dct.identity(6), s) == 0.0


def test_hadamard_closed_form():
    P = profile(dct.dirac_hadamard(64), 32)
    for s in range(1, 33):
        assert abs(P.mu1(s) - s / 8) <= 1e-12
    assert cumulative_coherence(dct.dirac_hadamard(64), 4) == pytest.approx(0.5, abs=1e-12)


def test_fourier_closed_form():
    P = profile(dct.dirac_fourier(16), 8)
    for s in range(1, 9):
        assert abs(P.mu1(s) - s / 4) <= 1e-12
    assert profile(dct.dirac_fourier(16), 3).mu1(3) == pytest.approx(0.75, abs=1e-12)


def test_gaussian_5_8_bruteforce():
    D = dct.gaussian(5, 8, 11)
    assert cumulative_coherence(D, 3) == pytest.approx(mu1_bruteforce(D.matrix, 3), abs=1e-12)


def test_decaying_square_profile_below_limit():
    P = profile(dct.decaying(64, 64, BETA), 32)
    limit = 2 * BETA / (1 - BETA)
    assert max(P.values) < limit


@pytest.mark.xfail(strict=True, reason="no 64x128 unit-norm frame meets this bound; see decisions ledger")
def test_decaying_redundant_profile_below_limit():
    P = profile(dct.decaying(64, 128, BETA), 32)
    assert max(P.values) < 2 * BETA / (1 - BETA)


def test_redundant_bound_is_unattainable():
    # Any 64x128 unit-norm frame has a column i with sum_j |G_ij|^2 >= n/m - 1 = 1.
    # If mu1(32) < L, sorting that column's moduli g_1 >= g_2 >= ... gives
    # sum_{k<=32} g_k^2 <= g_1 * L <= L^2 and sum_{k>32} g_k^2 <= 95 (L/32)^2,
    # far below 1 for L = 2 beta/(1 - beta).
    L = 2 * BETA / (1 - BETA)
    assert L * L + 95 * (L / 32) ** 2 < 1
    G = np.abs(gram(dct.decaying(64, 128, BETA))) ** 2
    np.fill_diagonal(G, 0)
    assert G.sum(axis=0).max() >= 128 / 64 - 1 - 1e-9


def test_profile_values_one_is_coherence():
    D = dct.gaussian(6, 9, 4)
    assert profile(D, 5).values[1] == coherence(D)


def test_profile_range_errors():
    D = dct.gaussian(3, 5, 0)
    with pytest.raises(RangeError):
        profile(D, 5)
    with pytest.raises(RangeError):
        profile(D, 0)
    with pytest.raises(RangeError):
        cumulative_coherence(D, 5)
    with pytest.raises(RangeError):
        profile(D, 2).mu1(3)


def test_ric_upper_bound():
    P = profile(dct.dirac_hadamard(64), 8)
    assert ric_upper_bound(P, 4) == pytest.approx(3 / 8)
    assert ric_upper_bound(profile(dct.identity(5), 3), 3) == 0.0
    with pytest.raises(RangeError):
        ric_upper_bound(P, 1)
    with pytest.raises(RangeError):
        ric_upper_bound(P, 10)


def test_ric_bound_dominates_exact_ric():
    D = dct.gaussian(6, 10, 2)
    P = profile(D, 4)
    assert ric_upper_bound(P, 3) >= ric_bruteforce(D.matrix, 3) - 1e-12


def test_profile_from_values_and_scaled():
    P = CoherenceProfile.from_values(10, [0.1, 0.2, 0.3])
    assert P.mu == 0.1 and P.s_max == 3 and P[0] == 0.0
    Q = P.scaled(2.0)
    assert Q.mu1(3) == pytest.approx(0.6)


# -- profile invariants ---------------------------------------------------------------

matrices = st.builds(
    lambda m, n, seed, cplx: _rand_dict(m, n, seed, cplx),
    st.integers(1, 6), st.integers(2, 9), st.integers(0, 10**6), st.booleans(),
)


def _rand_dict(m, n, seed, cplx):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n))
    if cplx:
        a = a + 1j * rng.standard_normal((m, n))
    return dct.from_array(a)


@given(matrices)
def test_profile_invariants(D):
    P = profile(D, D.n - 1)
    v = np.array(P.values)
    assert np.all(np.diff(v) >= 0)
    assert P.mu == P.values[1]
    for s in range(1, P.s_max + 1):
        assert P.mu - 1e-15 <= v[s] <= s * P.mu + 1e-12


@given(matrices)
def test_profile_matches_subset_enumeration(D):
    P = profile(D, D.n - 1)
    for s in range(1, min(D.n - 1, 4) + 1):
        assert abs(P.mu1(s) - mu1_bruteforce(D.matrix, s)) <= 1e-12


@given(matrices)
def test_ric_bound_property(D):
    if D.n < 3:
        return
    P = profile(D, 2)
    assert ric_bruteforce(D.matrix, 3) <= ric_upper_bound(P, 3) + 1e-10


# -- sampled verifiers -------------------------------------------------------------------

def test_quasi_isometry_identity_tight():
    r = verify_quasi_isometry(dct.identity(8), 3, 200, 0)
    assert r.ok and r.max_violation <= 1e-12


@pytest.mark.parametrize("D,s", [(dct.dirac_hadamard(16), 2), (dct.dirac_fourier(16), 3)])
def test_quasi_isometry(D, s):
    r = verify_quasi_isometry(D, s, 1000, 1)
    assert r.ok and r.trials == 1000


@pytest.mark.parametrize("D,s,t", [(dct.dirac_hadamard(16), 2, 2), (dct.dirac_fourier(8), 1, 2),
                                   (dct.identity(8), 2, 3)])
def test_restricted_orthogonality(D, s, t):
    r = verify_restricted_orthogonality(D, s, t, 1000, 2)
    assert r.ok


def test_polytope_bound():
    assert verify_polytope_bound(dct.dirac_hadamard(16), 2, 3, 1.0, 1000, 3).ok
    assert verify_polytope_bound(dct.dirac_fourier(16), 2, 3, 0.5, 999, 4).ok


def test_norm_gap():
    assert verify_norm_gap(16, 10_000, 5).ok
    assert verify_norm_gap(1, 10, 5).max_violation <= 1e-15


def test_norm_gap_constant_vector():
    x = np.ones(9) / 3
    lhs = np.linalg.norm(x) - np.abs(x).sum() / 3
    assert lhs <= 1e-15


def test_verifier_detects_wrong_profile():
    # a profile that claims zero coherence must be caught
    D = dct.dirac_hadamard(16)
    fake = CoherenceProfile.from_values(D.n, [0.0] * 8)
    assert not verify_quasi_isometry(D, 3, 200, 0, P=fake).ok
    assert not verify_restricted_orthogonality(D, 2, 2, 200, 0, P=fake).ok


def test_verifier_argument_errors():
    D = dct.dirac_hadamard(4)
    with pytest.raises(DomainError):
        verify_quasi_isometry(D, 2, 0, 0)
    with pytest.raises(RangeError):
        verify_restricted_orthogonality(D, 5, 4, 10, 0)
    with pytest.raises(DomainError):
        verify_polytope_bound(D, 1, 1, 0.0, 10, 0)
