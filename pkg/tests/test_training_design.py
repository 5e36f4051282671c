import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from risce.exceptions import SingularDesignError
from risce.training_design import (
    DesignKind,
    TrainingDesign,
    accumulators,
    dft_plus_matrix,
    identity_matrix,
    make_design,
    mdft_matrix,
    random_phase_matrix,
)


def loop_accumulators(Phi):
    N, tau = Phi.shape
    Omega = np.zeros((N, N), dtype=complex)
    omega = np.zeros(N, dtype=complex)
    for t in range(tau):
        psi = Phi[:, t]
        Omega += np.outer(psi.conj(), psi)
        omega += psi.conj()
    return Omega, omega


class TestMdft:
    def test_single_element(self):
        d = mdft_matrix(1)
        np.testing.assert_allclose(d.Phi, [[1, -1]], atol=1e-15)
        np.testing.assert_allclose(d.Omega, [[2]])
        np.testing.assert_allclose(d.omega, [0], atol=1e-15)

    @pytest.mark.parametrize("N", range(1, 33))
    def test_accumulators(self, N):
        d = mdft_matrix(N)
        assert d.tau_1 == N + 1
        assert np.max(np.abs(d.Omega - (N + 1) * np.eye(N))) < 1e-10
        assert np.max(np.abs(d.omega)) < 1e-10
        assert d.alpha == pytest.approx(N + 1, abs=1e-9)

    def test_direct_accumulation(self):
        Omega, _ = loop_accumulators(mdft_matrix(3).Phi)
        assert np.max(np.abs(Omega - 4 * np.eye(3))) < 1e-12

    def test_bound_attained(self):
        d = mdft_matrix(8)
        assert d.omega_inv_trace() == pytest.approx(8 / 9, abs=1e-10)


class TestDftPlus:
    def test_omega_form(self):
        w = np.exp(1j * np.array([0.3, 2.0, -1.0]))
        d = dft_plus_matrix(3, w)
        np.testing.assert_allclose(d.omega, 3 * np.eye(3)[0] + w.conj(), atol=1e-12)

    def test_small_case(self):
        d = dft_plus_matrix(2)
        np.testing.assert_allclose(d.Omega, [[3, 1], [1, 3]], atol=1e-12)

    def test_alpha_dense_solve(self):
        d = dft_plus_matrix(5)
        ref = d.tau_1 - np.real(d.omega.conj() @ np.linalg.inv(d.Omega) @ d.omega)
        assert d.alpha == pytest.approx(ref, abs=1e-10)

    def test_rejects_non_unit_w(self):
        with pytest.raises(ValueError):
            dft_plus_matrix(3, [1.0, 0.5, -1.0])


class TestRandom:
    def test_unit_modulus_and_trace(self, rng):
        d = random_phase_matrix(6, rng)
        np.testing.assert_allclose(np.abs(d.Phi), 1.0, atol=1e-12)
        assert np.trace(d.Omega).real == pytest.approx(d.tau_1 * 6, abs=1e-9)

    def test_lower_bound(self, rng):
        for _ in range(1000):
            d = random_phase_matrix(4, rng)
            assert d.omega_inv_trace() >= 4 / 5 - 1e-9

    def test_custom_tau(self, rng):
        assert random_phase_matrix(3, rng, tau_1=7).Phi.shape == (3, 7)


class TestAccumulators:
    @given(st.integers(1, 6), st.integers(0, 10_000))
    def test_matches_loop_and_hermitian(self, N, seed):
        Phi = np.exp(1j * np.random.default_rng(seed).uniform(0, 2 * np.pi, (N, N + 1)))
        Omega, omega, alpha = accumulators(Phi)
        O_ref, w_ref = loop_accumulators(Phi)
        np.testing.assert_allclose(Omega, O_ref, atol=1e-12)
        np.testing.assert_allclose(omega, w_ref, atol=1e-12)
        assert np.max(np.abs(Omega - Omega.conj().T)) < 1e-12
        assert np.trace(Omega).real == pytest.approx((N + 1) * N, abs=1e-9)
        assert alpha >= -1e-9

    def test_singular(self):
        with pytest.raises(SingularDesignError):
            accumulators(np.ones((3, 4)))


class TestIdentity:
    def test_default_is_nonsingular(self):
        d = identity_matrix(3)
        assert d.Phi.shape == (3, 4)
        np.testing.assert_allclose(d.Omega, np.eye(3))

    def test_short_training_is_rejected(self):
        with pytest.raises(SingularDesignError):
            identity_matrix(3, tau_1=2)


def test_make_design_dispatch(rng):
    assert make_design("MDFT", 3).kind is DesignKind.MDFT
    assert make_design(DesignKind.DFT_PLUS, 3).kind is DesignKind.DFT_PLUS
    assert make_design(DesignKind.RANDOM, 3, rng).Phi.shape == (3, 4)
    with pytest.raises(ValueError):
        make_design(DesignKind.RANDOM, 3)


def test_from_phi_roundtrip():
    d = mdft_matrix(4)
    e = TrainingDesign.from_phi(d.Phi, "MDFT")
    np.testing.assert_allclose(e.Omega, d.Omega, atol=1e-12)
    assert not d.omega.any()
