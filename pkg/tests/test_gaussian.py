import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvqkd_rateopt import gaussian as gs


def _squeezer(r):
    return np.diag([np.exp(-r), np.exp(r)])


def random_state(rng, n_modes):
    """Physical covariance S diag(nu) S^T with a random symplectic S."""
    nu = 1.0 + rng.exponential(2.0, n_modes)
    g = np.diag(np.repeat(nu, 2))
    for _ in range(3):
        s = np.eye(2 * n_modes)
        for m in range(n_modes):
            s[2 * m:2 * m + 2, 2 * m:2 * m + 2] = _squeezer(rng.normal(0, 0.5))
        g = s @ g @ s.T
        if n_modes > 1:
            a, b = rng.choice(n_modes, 2, replace=False)
            g = gs.apply_beamsplitter(g, a, b, rng.uniform())
    return g, np.sort(nu)[::-1]


def test_omega_is_antisymmetric_and_squares_to_minus_one():
    w = gs.omega(3)
    assert np.array_equal(w.T, -w)
    assert np.allclose(w @ w, -np.eye(6))


def test_vacuum_and_epr_are_pure():
    assert gs.von_neumann_entropy(np.eye(2)) == 0.0
    for v in (1.0, 1.5, 10.0, 300.0):
        np.testing.assert_allclose(gs.symplectic_eigenvalues(gs.epr_covariance(v)), [1.0, 1.0], atol=1e-9)
        assert gs.von_neumann_entropy(gs.epr_covariance(v)) == pytest.approx(0.0, abs=1e-7)


def test_g_entropy_values():
    assert gs.g_entropy(1.0) == 0.0
    # nu = 3: ((3+1)/2) log2 2 - ((3-1)/2) log2 1 = 2
    assert gs.g_entropy(3.0) == pytest.approx(2.0, abs=1e-15)
    # thermal state with mean photon number nbar has nu = 2 nbar + 1
    nbar = 0.7
    ref = (nbar + 1) * np.log2(nbar + 1) - nbar * np.log2(nbar)
    assert gs.g_entropy(2 * nbar + 1) == pytest.approx(ref, rel=1e-13)


def test_purity_band_is_clamped_not_rejected():
    g = (1.0 - 1e-10) * np.eye(2)
    assert gs.symplectic_eigenvalues(g)[0] == 1.0
    assert gs.g_entropy(1.0 - 1e-10) == 0.0


def test_unphysical_states_raise():
    with pytest.raises(gs.GaussianDomainError):
        gs.validate_covariance(0.5 * np.eye(2))
    with pytest.raises(gs.GaussianDomainError):
        gs.validate_covariance(-np.eye(2))
    assert gs.is_physical(np.diag([0.5, 2.0]))  # squeezed vacuum
    # positive diagonal but violates the uncertainty relation
    with pytest.raises(gs.GaussianDomainError):
        gs.symplectic_eigenvalues(np.diag([4.0, 0.2]))
    with pytest.raises(gs.GaussianDomainError):
        gs.validate_covariance(np.array([[2.0, 0.3], [0.1, 2.0]]))
    with pytest.raises(gs.GaussianDomainError):
        gs.validate_covariance(np.eye(3))
    assert not gs.is_physical(np.diag([4.0, 0.2]))


def test_beamsplitter_limits():
    g, _ = random_state(np.random.default_rng(0), 2)
    np.testing.assert_allclose(gs.apply_beamsplitter(g, 0, 1, 1.0), g, atol=1e-12)
    sw = gs.apply_beamsplitter(g, 0, 1, 0.0)
    np.testing.assert_allclose(sw[:2, :2], g[2:, 2:], atol=1e-12)
    np.testing.assert_allclose(sw[2:, 2:], g[:2, :2], atol=1e-12)
    with pytest.raises(gs.GaussianDomainError):
        gs.apply_beamsplitter(g, 0, 0, 0.5)
    with pytest.raises(gs.GaussianDomainError):
        gs.apply_beamsplitter(g, 0, 1, 1.5)


def test_balanced_beamsplitter_on_vacuum_and_thermal():
    g = gs.direct_sum(gs.thermal_covariance(5.0), np.eye(2))
    out = gs.apply_beamsplitter(g, 0, 1, 0.5)
    np.testing.assert_allclose(np.diag(out), [3.0, 3.0, 3.0, 3.0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4), tau=st.floats(0.0, 1.0))
def test_beamsplitter_preserves_symplectic_spectrum(seed, n, tau):
    g, nu = random_state(np.random.default_rng(seed), n)
    np.testing.assert_allclose(gs.symplectic_eigenvalues(g), nu, rtol=1e-7)
    out = gs.apply_beamsplitter(g, 0, n - 1, tau)
    np.testing.assert_allclose(gs.symplectic_eigenvalues(out), nu, rtol=1e-7)


def test_heterodyne_on_epr_half_leaves_pure_state():
    for v in (1.2, 3.0, 11.0):
        cond = gs.heterodyne_condition(gs.epr_covariance(v), 1)
        # v - (v^2 - 1)/(v + 1) = 1
        np.testing.assert_allclose(cond, np.eye(2), atol=1e-12)


def test_heterodyne_on_product_state_is_marginal():
    a = gs.thermal_covariance(2.5)
    g = gs.direct_sum(a, gs.thermal_covariance(4.0))
    np.testing.assert_allclose(gs.heterodyne_condition(g, 1), a)
    with pytest.raises(gs.GaussianDomainError):
        gs.heterodyne_condition(a, 0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4))
def test_conditioning_keeps_states_physical_and_lowers_entropy(seed, n):
    g, _ = random_state(np.random.default_rng(seed), n)
    cond = gs.heterodyne_condition(g, 0)
    assert gs.is_physical(cond)
    # measuring part of a system cannot raise the entropy of the rest on average
    rest = g[2:, 2:]
    assert gs.von_neumann_entropy(cond) <= gs.von_neumann_entropy(rest) + 1e-9
