"""RIS transmission phases, MRC SNR and spectral efficiency."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .channel_model import ScatterBundle, SystemGeometry, steering_ris

__all__ = [
    "MeanSnrTerms",
    "PerformanceSample",
    "PhaseSource",
    "RisPhaseConfig",
    "effective_directions",
    "gaussian_phase_perturb",
    "mean_snr_terms",
    "mrc_snr",
    "ms_phase_error",
    "nmse_a1",
    "nmse_a2",
    "nmse_diagnostics",
    "optimal_ris_phases",
    "random_ris_phases",
    "se_drop_approx",
    "spectral_efficiency",
]


class PhaseSource(str, Enum):
    PERFECT = "PERFECT"
    ESTIMATED = "ESTIMATED"
    RANDOM = "RANDOM"
    GAUSSIAN_PERTURBED = "GAUSSIAN_PERTURBED"


@dataclass(frozen=True)
class RisPhaseConfig:
    """Diagonal of the transmission phase matrix plus how it was obtained."""

    phases: np.ndarray
    nu_hat: complex
    source: PhaseSource
    sigma_e: float | None = None
    flags: tuple[str, ...] = field(default=())

    @property
    def Phi_bar(self) -> np.ndarray:
        return np.diag(self.phases)


def effective_directions(H_BR) -> tuple[np.ndarray, np.ndarray]:
    """Principal left singular vector and unit-modulus phases of the right one.

    For a rank-1 ``H_BR = sqrt(b) a_B a_R^H`` these reproduce ``a_B`` and
    ``a_R`` up to a common phase, which cancels in :func:`optimal_ris_phases`.
    """
    U, _, Vh = np.linalg.svd(np.asarray(H_BR))
    u = U[:, 0]
    v = Vh[0].conj()
    return u, np.exp(1j * np.angle(v))


def optimal_ris_phases(h_RU, h_BU, a_B_eff, a_R_eff, source: PhaseSource | str = PhaseSource.ESTIMATED,
                       blocked_direct: bool = False) -> RisPhaseConfig:
    """Single-user optimal phases ``nu diag(a_R) diag(exp(-j angle(h_RU)))``.

    ``nu`` aligns the RIS path with the direct path seen through ``a_B_eff``.
    Zero entries of ``h_RU`` get phase 0 and a zero direct projection (or a
    blocked direct link) gives ``nu = 1``; each case adds a flag.
    """
    h_RU = np.asarray(h_RU, dtype=complex)
    flags = []
    mag = np.abs(h_RU)
    zero = mag == 0
    if zero.any():
        flags.append("zero_h_RU_entry")
    unit = np.where(zero, 1.0, h_RU.conj() / np.where(zero, 1.0, mag))
    proj = np.vdot(np.asarray(a_B_eff), np.asarray(h_BU))
    if blocked_direct:
        nu = 1.0 + 0j
        flags.append("blocked_direct")
    elif abs(proj) == 0:
        nu = 1.0 + 0j
        flags.append("zero_direct_projection")
    else:
        nu = proj / abs(proj)
    phases = nu * np.asarray(a_R_eff) * unit
    return RisPhaseConfig(phases, complex(nu), PhaseSource(source), flags=tuple(flags))


def random_ris_phases(N: int, rng: np.random.Generator) -> RisPhaseConfig:
    phases = np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=N))
    return RisPhaseConfig(phases, 1.0 + 0j, PhaseSource.RANDOM)


def _diag(config) -> np.ndarray:
    if isinstance(config, RisPhaseConfig):
        return config.phases
    arr = np.asarray(config)
    return np.diagonal(arr) if arr.ndim == 2 else arr


def ms_phase_error(Phi_bar, Phi_star) -> float:
    """Mean squared phase difference, wrapped to ``(-pi, pi]``, in rad^2."""
    a, b = _diag(Phi_bar), _diag(Phi_star)
    if a.shape != b.shape:
        raise ValueError("phase configurations differ in size")
    d = np.angle(a) - np.angle(b)
    d = np.where(d > np.pi, d - 2 * np.pi, np.where(d <= -np.pi, d + 2 * np.pi, d))
    return float(np.mean(d ** 2))


def gaussian_phase_perturb(Phi_star, sigma_e: float, rng: np.random.Generator) -> RisPhaseConfig:
    """Add iid N(0, sigma_e^2) errors to the phases of ``Phi_star``."""
    if sigma_e < 0:
        raise ValueError("sigma_e must be >= 0")
    base = _diag(Phi_star)
    e = rng.normal(0.0, sigma_e, size=base.shape) if sigma_e > 0 else np.zeros(base.shape)
    nu = Phi_star.nu_hat if isinstance(Phi_star, RisPhaseConfig) else 1.0 + 0j
    return RisPhaseConfig(base * np.exp(1j * e), nu, PhaseSource.GAUSSIAN_PERTURBED, sigma_e=sigma_e)


def mrc_snr(h_TOT_hat, h_TOT_true, rho_D: float) -> float:
    """Uplink SNR of matched-filter combining with an imperfect channel estimate.

    The estimation error is treated as interference, so the result is not
    invariant to rescaling ``h_TOT_hat``.
    """
    h_hat = np.asarray(h_TOT_hat)
    h = np.asarray(h_TOT_true)
    if h_hat.shape != h.shape:
        raise ValueError("estimate and true channel differ in length")
    g = float(np.vdot(h_hat, h_hat).real)
    if g == 0.0:
        return 0.0
    leak = abs(np.vdot(h_hat, h_hat - h)) ** 2
    return rho_D * g ** 2 / (rho_D * leak + g)


def spectral_efficiency(snr: float, T: int, tau: int) -> float:
    """``(T - tau)/T * log2(1 + snr)``, in bits/s/Hz."""
    if not 0 <= tau <= T:
        raise ValueError(f"pilot count tau={tau} must lie in [0, T={T}]")
    return (T - tau) / T * math.log2(1.0 + snr)


def se_drop_approx(sigma_e: float) -> float:
    """Approximate SE loss ``sigma_e^2 log2(e)`` from Gaussian RIS phase errors."""
    if sigma_e < 0:
        raise ValueError("sigma_e must be >= 0")
    return sigma_e ** 2 * math.log2(math.e)


@dataclass(frozen=True)
class MeanSnrTerms:
    """Monte Carlo estimates of the three mean-SNR terms (``rho_D`` factored out).

    ``S3_diag`` is the ``n = n'`` part of ``S3``; it is kept so the exact mean
    can be told apart from the bound.
    """

    S1: float
    S2: float
    S3: float
    S3_diag: float
    rho_D: float
    pure_los: bool = True

    def bound(self, sigma_e: float) -> float:
        return self.rho_D * (self.S1 + self.S2 * math.exp(-sigma_e ** 2 / 2) + self.S3 * math.exp(-sigma_e ** 2))

    def exact(self, sigma_e: float) -> float:
        """Mean SNR without discarding the diagonal terms' lost factor."""
        cross = self.S3 - self.S3_diag
        return self.rho_D * (self.S1 + self.S2 * math.exp(-sigma_e ** 2 / 2)
                             + self.S3_diag + cross * math.exp(-sigma_e ** 2))


def mean_snr_terms(geometry: SystemGeometry, realizations, rho_D: float) -> MeanSnrTerms:
    """Estimate ``S1``, ``S2``, ``S3`` by averaging over channel realizations.

    Expectations are over small-scale fading with the realizations' gains
    held fixed. Scatter in any realization voids the approximation; the
    result is then flagged with ``pure_los=False`` and a warning.
    """
    realizations = list(realizations)
    if not realizations:
        raise ValueError("need at least one realization")
    a_B = geometry.a_B_los()
    M = geometry.M
    pure = all(np.count_nonzero(r.H_BR_scatter) == 0 for r in realizations)
    if not pure:
        warnings.warn("mean-SNR terms assume a pure-LoS RIS-BS channel", RuntimeWarning, stacklevel=2)
    beta = realizations[0].budget.beta_BR
    h_bu_sq = np.array([np.vdot(r.h_BU, r.h_BU).real for r in realizations])
    xi = np.array([abs(np.vdot(a_B, r.h_BU)) for r in realizations])
    s_abs = np.array([np.abs(r.h_RU).sum() for r in realizations])
    s_sq = np.array([np.sum(np.abs(r.h_RU) ** 2) for r in realizations])
    S1 = float(h_bu_sq.mean())
    S2 = float(2 * math.sqrt(beta) * xi.mean() * s_abs.mean())
    S3 = float(beta * M * np.mean(s_abs ** 2))
    S3_diag = float(beta * M * s_sq.mean())
    return MeanSnrTerms(S1, S2, S3, S3_diag, rho_D, pure)


def nmse_a1(eps_RU, h_RU_hat, h_TOT) -> float:
    """Sample estimate of the high-K NMSE term.

    All inputs are stacked per draw: ``eps_RU`` and ``h_RU_hat`` are
    ``(draws, N)``, ``h_TOT`` is ``(draws, M)``.
    """
    eps = np.atleast_2d(eps_RU)
    unit = np.exp(-1j * np.angle(np.atleast_2d(h_RU_hat)))
    num = np.mean(np.abs(np.sum(unit * eps, axis=1)) ** 2)
    den = np.mean(np.sum(np.abs(np.atleast_2d(h_TOT)) ** 2, axis=1))
    return float(num / den)


def nmse_a2(rays: ScatterBundle | None, geometry: SystemGeometry, h_RU_hat) -> float:
    """Moderate-K NMSE numerator for one draw of the RIS-BS scatter rays."""
    if rays is None:
        return 0.0
    g = geometry
    a = steering_ris(rays.phi_R, rays.theta_R, g.N_y, g.N_z, g.d_R)
    weighted = g.a_R_los() * np.abs(np.asarray(h_RU_hat))
    inner = np.einsum("csn,n->cs", a.conj(), weighted)
    return float(g.M * np.sum(rays.powers * np.abs(inner) ** 2))


def nmse_diagnostics(mode: str, **inputs) -> float:
    """Dispatch to :func:`nmse_a1` (``mode="A1"``) or :func:`nmse_a2` (``"A2"``)."""
    mode = mode.upper()
    if mode == "A1":
        return nmse_a1(inputs["eps_RU"], inputs["h_RU_hat"], inputs["h_TOT"])
    if mode == "A2":
        if "rays" not in inputs:
            raise ValueError("A2 needs the scatter ray metadata")
        return nmse_a2(inputs["rays"], inputs["geometry"], inputs["h_RU_hat"])
    raise ValueError(f"unknown NMSE diagnostic {mode!r}")


@dataclass(frozen=True)
class PerformanceSample:
    snr: float
    se: float
    ms_phase_error: float
    nmse: float
    rho_D: float
    T: int
