import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import crandn
from risce.channel_model import ClusterConfig, LinkBudget, SystemGeometry, draw_channels, total_channel
from risce.transmission import (
    PhaseSource,
    effective_directions,
    gaussian_phase_perturb,
    mean_snr_terms,
    mrc_snr,
    ms_phase_error,
    nmse_a1,
    nmse_a2,
    nmse_diagnostics,
    optimal_ris_phases,
    random_ris_phases,
    se_drop_approx,
    spectral_efficiency,
)

UE = ClusterConfig(C=3, S=5, sigma_phi=0.25, sigma_theta=0.11, sigma_Delta=0.033, sigma_delta=0.024)


def setup(M=4, N_y=2, N_z=4, K=math.inf, seed=0, blocked=False):
    g = SystemGeometry.from_layout(M, N_y, N_z)
    ch = draw_channels(g, LinkBudget(1e-2, 1e-2, 0.5, K), UE, UE, np.random.default_rng(seed), blocked)
    return g, ch


class TestOptimalPhases:
    def test_coherent_combining(self):
        g, ch = setup()
        cfg = optimal_ris_phases(ch.h_RU, ch.h_BU, g.a_B_los(), g.a_R_los(), PhaseSource.PERFECT)
        terms = [g.a_B_los().conj() @ ch.H_BR_los[:, n] * cfg.phases[n] * ch.h_RU[n] for n in range(g.N)]
        ang = np.angle(np.array(terms) * np.conj(terms[0]))
        assert np.max(np.abs(ang)) < 1e-9
        # and aligned with the direct path
        assert abs(np.angle(terms[0] * np.conj(g.a_B_los().conj() @ ch.h_BU))) < 1e-9

    def test_identity(self):
        cfg = optimal_ris_phases(np.array([1.0, 2.0, 0.5]), np.ones(2), np.ones(2), np.ones(3), blocked_direct=True)
        np.testing.assert_allclose(cfg.Phi_bar, np.eye(3))

    def test_beats_random(self):
        g, ch = setup()
        rho_D = 1e3
        star = optimal_ris_phases(ch.h_RU, ch.h_BU, g.a_B_los(), g.a_R_los())
        h = total_channel(ch.H_BR.full, star.phases, ch.h_RU, ch.h_BU)
        best = mrc_snr(h, h, rho_D)
        rng = np.random.default_rng(1)
        for _ in range(100):
            hr = total_channel(ch.H_BR.full, random_ris_phases(g.N, rng).phases, ch.h_RU, ch.h_BU)
            assert mrc_snr(hr, hr, rho_D) <= best

    def test_flags(self):
        cfg = optimal_ris_phases(np.array([0.0, 1.0]), np.zeros(2), np.ones(2), np.ones(2))
        assert "zero_h_RU_entry" in cfg.flags and "zero_direct_projection" in cfg.flags
        assert cfg.nu_hat == 1
        np.testing.assert_allclose(np.abs(cfg.phases), 1.0)

    @given(st.integers(0, 10_000))
    def test_unit_modulus(self, seed):
        rng = np.random.default_rng(seed)
        cfg = optimal_ris_phases(crandn(rng, 6), crandn(rng, 3), np.exp(1j * rng.uniform(0, 6, 3)),
                                 np.exp(1j * rng.uniform(0, 6, 6)))
        np.testing.assert_allclose(np.abs(cfg.phases), 1.0, atol=1e-12)

    def test_singular_vectors_of_rank_one(self):
        g, ch = setup()
        u, v = effective_directions(ch.H_BR_los)
        a = optimal_ris_phases(ch.h_RU, ch.h_BU, g.a_B_los(), g.a_R_los())
        b = optimal_ris_phases(ch.h_RU, ch.h_BU, u, v)
        np.testing.assert_allclose(a.phases, b.phases, atol=1e-9)


class TestPhaseError:
    def test_identical(self):
        p = np.exp(1j * np.arange(5))
        assert ms_phase_error(p, p) == 0

    def test_quarter_turn(self):
        p = np.ones(4)
        assert ms_phase_error(1j * p, p) == pytest.approx(math.pi ** 2 / 4)
        assert ms_phase_error(np.array([1j, -1j]), np.ones(2)) == pytest.approx(math.pi ** 2 / 4)

    def test_wrapping(self):
        assert ms_phase_error(np.exp(1j * np.array([3.1])), np.exp(1j * np.array([-3.1]))) == pytest.approx(
            (2 * math.pi - 6.2) ** 2)

    @given(st.floats(-10, 10), st.integers(0, 1000))
    def test_common_rotation(self, phi, seed):
        rng = np.random.default_rng(seed)
        a, b = np.exp(1j * rng.uniform(-3, 3, 6)), np.exp(1j * rng.uniform(-3, 3, 6))
        r = np.exp(1j * phi)
        assert ms_phase_error(a * r, b * r) == pytest.approx(ms_phase_error(a, b), abs=1e-9)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            ms_phase_error(np.ones(2), np.ones(3))


class TestMrc:
    def test_perfect(self, rng):
        h = crandn(rng, 4)
        assert mrc_snr(h, h, 2.0) == pytest.approx(2.0 * np.vdot(h, h).real, rel=1e-12)

    def test_scaled_estimate(self, rng):
        # the half-scale residual counts as interference: rho g / (rho g + 4)
        h = crandn(rng, 4)
        g = np.vdot(h, h).real
        assert mrc_snr(h / 2, h, 3.0) == pytest.approx(3.0 * g / (3.0 * g + 4.0), rel=1e-12)

    def test_zero_estimate(self):
        assert mrc_snr(np.zeros(3), np.ones(3), 1.0) == 0.0

    def test_reevaluation(self, rng):
        h, e = crandn(rng, 4), 0.3 * crandn(rng, 4)
        hh = h + e
        num = 5.0 * sum(abs(x) ** 2 for x in hh) ** 2
        lk = sum(x.conjugate() * (x - y) for x, y in zip(hh, h))
        den = 5.0 * abs(lk) ** 2 + sum(abs(x) ** 2 for x in hh)
        assert mrc_snr(hh, h, 5.0) == pytest.approx(num / den, rel=1e-12)


class TestSpectralEfficiency:
    def test_cases(self):
        assert spectral_efficiency(5.0, 10, 10) == 0.0
        assert spectral_efficiency(1.0, 10, 0) == pytest.approx(1.0)
        assert spectral_efficiency(3.0, 400, 193) == pytest.approx(1.035, abs=1e-12)

    def test_too_many_pilots(self):
        with pytest.raises(ValueError):
            spectral_efficiency(1.0, 10, 11)

    def test_drop_approx(self):
        assert se_drop_approx(0.0) == 0.0
        assert se_drop_approx(1.0) == pytest.approx(1.4427, abs=1e-4)


class TestPerturbation:
    def test_zero_sigma(self, rng):
        p = np.exp(1j * rng.uniform(0, 6, 5))
        np.testing.assert_array_equal(gaussian_phase_perturb(p, 0.0, rng).phases, p)

    def test_moments(self):
        rng = np.random.default_rng(9)
        base = np.ones(100_000, dtype=complex)
        for s in (0.3, 0.7, 1.0):
            p = gaussian_phase_perturb(base, s, rng)
            assert ms_phase_error(p, base) == pytest.approx(s ** 2, rel=0.02)
            assert np.mean(p.phases).real == pytest.approx(math.exp(-s ** 2 / 2), rel=0.01)

    def test_negative(self, rng):
        with pytest.raises(ValueError):
            gaussian_phase_perturb(np.ones(2), -0.1, rng)


class TestMeanSnr:
    def ensemble(self, M, N_y, N_z, n, blocked=False):
        return [setup(M, N_y, N_z, seed=s, blocked=blocked)[1] for s in range(n)]

    def test_sigma_zero_is_optimal_snr(self):
        g, _ = setup(4, 2, 4)
        chans = self.ensemble(4, 2, 4, 400)
        terms = mean_snr_terms(g, chans, 50.0)
        snr = []
        for ch in chans:
            star = optimal_ris_phases(ch.h_RU, ch.h_BU, g.a_B_los(), g.a_R_los())
            h = total_channel(ch.H_BR.full, star.phases, ch.h_RU, ch.h_BU)
            snr.append(50.0 * np.vdot(h, h).real)
        assert terms.bound(0.0) == pytest.approx(np.mean(snr), rel=0.03)
        assert terms.exact(0.0) == terms.bound(0.0)

    def test_single_element_exact(self):
        # with N = 1 there are no cross terms and the exact mean is a closed form
        g, _ = setup(2, 1, 1)
        chans = self.ensemble(2, 1, 1, 300, blocked=True)
        t = mean_snr_terms(g, chans, 10.0)
        assert t.S3 == pytest.approx(t.S3_diag, rel=1e-12)
        rng = np.random.default_rng(2)
        sims = []
        for ch in chans:
            star = optimal_ris_phases(ch.h_RU, ch.h_BU, g.a_B_los(), g.a_R_los(), blocked_direct=True)
            p = gaussian_phase_perturb(star, 0.8, rng)
            h = total_channel(ch.H_BR.full, p.phases, ch.h_RU, ch.h_BU)
            sims.append(10.0 * np.vdot(h, h).real)
        assert np.mean(sims) == pytest.approx(t.exact(0.8), rel=1e-12)
        assert t.bound(0.8) < t.exact(0.8)

    def test_bound_below_simulation(self):
        g, _ = setup(8, 4, 4)
        chans = self.ensemble(8, 4, 4, 300)
        t = mean_snr_terms(g, chans, 20.0)
        rng = np.random.default_rng(3)
        sims = []
        for ch in chans:
            star = optimal_ris_phases(ch.h_RU, ch.h_BU, g.a_B_los(), g.a_R_los())
            h = total_channel(ch.H_BR.full, gaussian_phase_perturb(star, 0.5, rng).phases, ch.h_RU, ch.h_BU)
            sims.append(20.0 * np.vdot(h, h).real)
        se = np.std(sims) / math.sqrt(len(sims))
        assert np.mean(sims) >= t.bound(0.5) - 3 * se

    def test_scatter_warns(self):
        g, ch = setup(K=10.0)
        with pytest.warns(RuntimeWarning):
            t = mean_snr_terms(g, [ch], 1.0)
        assert not t.pure_los

    def test_empty(self):
        g, _ = setup()
        with pytest.raises(ValueError):
            mean_snr_terms(g, [], 1.0)


class TestNmseDiagnostics:
    def test_a1_zero_error(self, rng):
        assert nmse_a1(np.zeros((3, 4)), crandn(rng, 3, 4), crandn(rng, 3, 2)) == 0.0

    def test_a2_pure_los(self):
        g, _ = setup()
        assert nmse_diagnostics("A2", rays=None, geometry=g, h_RU_hat=np.ones(g.N)) == 0.0

    def test_a2_aligned_ray(self):
        from risce.channel_model import ScatterBundle

        g, _ = setup(M=3, N_y=2, N_z=3)
        f = np.full((1, 1), 1.0)
        rays = ScatterBundle(np.full((1, 1), 0.2), np.zeros((1, 1)), f * g.phi_bar_B, f * g.theta_bar_B,
                             f * g.phi_bar_R, f * g.theta_bar_R)
        # an aligned ray makes the inner product N
        assert nmse_a2(rays, g, np.ones(g.N)) == pytest.approx(3 * 0.2 * g.N ** 2, rel=1e-12)

    def test_missing_rays(self):
        with pytest.raises(ValueError):
            nmse_diagnostics("A2", geometry=None, h_RU_hat=None)
        with pytest.raises(ValueError):
            nmse_diagnostics("A3")
