"""Geometry, large-scale fading and clustered ray-based channels.

The BS is a ULA of ``M`` antennas and the RIS is a vertical URA with ``N_y``
columns of ``N_z`` elements. RIS element ``n`` maps to column ``n // N_z`` and
row ``n % N_z`` (column-major), which is the ordering produced by
``a_y (x) a_z``. Every other module relies on that map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Array",
    "ChannelRealization",
    "ClusterConfig",
    "LinkBudget",
    "RayBundle",
    "RisBsChannel",
    "ScatterBundle",
    "SystemGeometry",
    "build_ris_bs_channel",
    "cluster_powers",
    "draw_channels",
    "draw_ray_channel",
    "laplace",
    "pathloss",
    "steering_bs",
    "steering_ris",
    "total_channel",
]


class Array(str, Enum):
    BS = "BS"
    RIS = "RIS"


@dataclass(frozen=True)
class SystemGeometry:
    """Static layout of the cell, the BS array and the RIS.

    Distances are in meters, spacings in wavelengths and angles in radians.
    Use :meth:`from_layout` to derive the distances from positions.
    """

    M: int
    N_y: int
    N_z: int
    d_B: float
    d_R: float
    r: float
    r_0: float
    D_BR: float
    D_U: float
    D_BU: float
    D_RU: float
    phi_bar_B: float
    theta_bar_B: float
    phi_bar_R: float
    theta_bar_R: float

    def __post_init__(self):
        if self.M < 1 or self.N_y < 1 or self.N_z < 1:
            raise ValueError("array sizes M, N_y, N_z must be >= 1")
        if self.d_B <= 0 or self.d_R <= 0:
            raise ValueError("element spacings must be positive")
        if not self.r_0 < self.D_U < self.r:
            raise ValueError(f"UE distance {self.D_U} must satisfy r_0 < D_U < r")
        for name in ("D_BR", "D_BU", "D_RU"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        angles = (self.phi_bar_B, self.theta_bar_B, self.phi_bar_R, self.theta_bar_R)
        if not all(math.isfinite(a) for a in angles):
            raise ValueError("LoS angles must be finite")
        for name in ("theta_bar_B", "theta_bar_R"):
            if not 0.0 <= getattr(self, name) <= math.pi:
                raise ValueError(f"{name} must lie in [0, pi]")

    @property
    def N(self) -> int:
        return self.N_y * self.N_z

    @classmethod
    def from_layout(
        cls,
        M: int,
        N_y: int,
        N_z: int,
        d_B: float = 0.5,
        d_R: float = 0.25,
        r: float = 100.0,
        r_0: float = 15.0,
        D_U: float = 50.0,
        bs_y: float = 5.0,
        ris_y: float = -5.0,
        phi_bar_B: float = math.pi / 6,
        phi_bar_R: float = math.pi / 4,
        theta_bar_B: float = math.pi / 2,
        theta_bar_R: float = math.pi / 2,
    ) -> "SystemGeometry":
        """Place the BS at ``(0, bs_y)``, the RIS at ``(0, ris_y)`` and the UE at
        ``(D_U, 0)``; all three at equal height.

        The LoS azimuths fix the array rotations: the BS broadside points at
        ``pi/2 - phi_bar_B`` and the RIS broadside at ``-pi/2 - phi_bar_R``
        from the x-axis (see :meth:`broadside_orientations`).
        """
        D_BR = abs(bs_y - ris_y)
        D_BU = math.hypot(D_U, bs_y)
        D_RU = math.hypot(D_U, ris_y)
        return cls(
            M=M, N_y=N_y, N_z=N_z, d_B=d_B, d_R=d_R, r=r, r_0=r_0,
            D_BR=D_BR, D_U=D_U, D_BU=D_BU, D_RU=D_RU,
            phi_bar_B=phi_bar_B, theta_bar_B=theta_bar_B,
            phi_bar_R=phi_bar_R, theta_bar_R=theta_bar_R,
        )

    def broadside_orientations(self) -> tuple[float, float]:
        """Broadside directions of the BS and RIS arrays relative to the x-axis."""
        return math.pi / 2 - self.phi_bar_B, -math.pi / 2 - self.phi_bar_R

    def a_B_los(self) -> np.ndarray:
        return steering_bs(self.phi_bar_B, self.theta_bar_B, self.M, self.d_B)

    def a_R_los(self) -> np.ndarray:
        return steering_ris(self.phi_bar_R, self.theta_bar_R, self.N_y, self.N_z, self.d_R)


def pathloss(A: float, L_dB: float, D: float, D_0: float, Gamma: float) -> float:
    """Linear power gain ``A * 10**(L_dB/10) * (D/D_0)**(-Gamma)``."""
    if D <= 0 or D_0 <= 0:
        raise ValueError(f"distances must be positive, got D={D}, D_0={D_0}")
    return A * 10.0 ** (L_dB / 10.0) * (D / D_0) ** (-Gamma)


@dataclass(frozen=True)
class LinkBudget:
    """Large-scale gains of the three links.

    ``K = inf`` marks a pure-LoS RIS-BS channel.
    """

    beta_BU: float
    beta_RU: float
    beta_BR: float
    K: float

    def __post_init__(self):
        if min(self.beta_BU, self.beta_RU, self.beta_BR) <= 0:
            raise ValueError("all large-scale gains must be positive")
        if not self.K >= 0:
            raise ValueError("K must be >= 0")

    @property
    def pure_los(self) -> bool:
        return math.isinf(self.K)

    @property
    def beta_bar_BR(self) -> float:
        if self.pure_los:
            return self.beta_BR
        return self.K * self.beta_BR / (self.K + 1.0)

    @property
    def beta_tilde_BR(self) -> float:
        if self.pure_los:
            return 0.0
        return self.beta_BR / (self.K + 1.0)

    @staticmethod
    def k_from_db(K_dB: float | None) -> float:
        """``None`` means pure LoS."""
        return math.inf if K_dB is None else 10.0 ** (K_dB / 10.0)


def _ula(spacing: float, n: int, u) -> np.ndarray:
    # u is the direction cosine; the result has shape u.shape + (n,)
    k = np.arange(n)
    return np.exp(-2j * np.pi * spacing * np.multiply.outer(np.asarray(u, dtype=float), k))


def steering_bs(phi, theta, M: int, d_B: float) -> np.ndarray:
    """BS ULA response; element ``m`` is ``exp(-j 2 pi d_B m sin(theta) sin(phi))``.

    Array-valued angles broadcast and yield an extra trailing axis of length M.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    return _ula(d_B, M, np.sin(theta) * np.sin(phi))


def steering_ris(phi, theta, N_y: int, N_z: int, d_R: float) -> np.ndarray:
    """RIS VURA response ``a_y(phi, theta) (x) a_z(theta)``, column-major.

    Array-valued angles broadcast; the trailing axis has length ``N_y * N_z``.
    """
    if N_y < 1 or N_z < 1:
        raise ValueError("N_y and N_z must be >= 1")
    a_y = _ula(d_R, N_y, np.sin(theta) * np.sin(phi))
    a_z = _ula(d_R, N_z, np.cos(theta))
    out = a_y[..., :, None] * a_z[..., None, :]
    return out.reshape(out.shape[:-2] + (N_y * N_z,))


def cluster_powers(beta: float, C: int, eta: float) -> np.ndarray:
    """Split ``beta`` over ``C`` clusters decaying geometrically to ratio ``eta``."""
    if C < 1:
        raise ValueError("C must be >= 1")
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    if C == 1:
        return np.array([float(beta)])
    q = eta ** (1.0 / (C - 1))
    w = q ** np.arange(C)
    return beta * w / w.sum()


def laplace(rng: np.random.Generator, loc, scale, size=None) -> np.ndarray:
    """Laplacian samples by inverse CDF of one uniform draw per sample."""
    u = rng.uniform(-0.5, 0.5, size=size)
    return loc - scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


@dataclass(frozen=True)
class ClusterConfig:
    """Clustered ray model parameters (angles in radians).

    For the RIS-BS scatter the ``*_mean`` fields are ignored and the cluster
    centers are aligned with the LoS angles instead.
    """

    C: int = 3
    S: int = 5
    eta: float = 0.1
    sigma_phi: float = 0.0
    sigma_theta: float = 0.0
    sigma_Delta: float = 0.0
    sigma_delta: float = 0.0
    azimuth_mean: float = 0.0
    elevation_mean: float = math.pi / 2

    def __post_init__(self):
        if self.C < 1 or self.S < 1:
            raise ValueError("C and S must be >= 1")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        spreads = (self.sigma_phi, self.sigma_theta, self.sigma_Delta, self.sigma_delta)
        if min(spreads) < 0:
            raise ValueError("angle spreads must be >= 0")

    def ray_powers(self, beta: float) -> np.ndarray:
        """(C, S) array of per-ray powers ``beta_c / S``."""
        return np.repeat(cluster_powers(beta, self.C, self.eta)[:, None] / self.S, self.S, axis=1)

    def draw_angles(self, rng, azimuth_mean, elevation_mean):
        """Azimuth centers Gaussian, elevation centers and all offsets Laplacian."""
        C, S = self.C, self.S
        phi_c = rng.normal(azimuth_mean, self.sigma_phi, size=C)
        theta_c = laplace(rng, elevation_mean, self.sigma_theta, size=C)
        phi = phi_c[:, None] + laplace(rng, 0.0, self.sigma_Delta, size=(C, S))
        theta = theta_c[:, None] + laplace(rng, 0.0, self.sigma_delta, size=(C, S))
        return phi, theta


@dataclass(frozen=True)
class RayBundle:
    """Per-ray metadata of one ray-based vector channel; arrays are (C, S)."""

    powers: np.ndarray
    phases: np.ndarray
    phi: np.ndarray
    theta: np.ndarray

    @property
    def gains(self) -> np.ndarray:
        return np.sqrt(self.powers) * np.exp(-1j * self.phases)


@dataclass(frozen=True)
class ScatterBundle:
    """Per-ray metadata of the RIS-BS scatter (angles on both sides)."""

    powers: np.ndarray
    phases: np.ndarray
    phi_B: np.ndarray
    theta_B: np.ndarray
    phi_R: np.ndarray
    theta_R: np.ndarray

    @property
    def gains(self) -> np.ndarray:
        return np.sqrt(self.powers) * np.exp(-1j * self.phases)


def draw_ray_channel(
    geometry: SystemGeometry,
    beta: float,
    clusters: ClusterConfig,
    array: Array | str,
    rng: np.random.Generator,
) -> tuple[np.ndarray, RayBundle]:
    """Draw ``sum_c sum_s gamma_cs a(phi_cs, theta_cs)`` towards the given array.

    Returns the channel vector and its ray metadata.
    """
    array = Array(array)
    powers = clusters.ray_powers(beta)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=powers.shape)
    phi, theta = clusters.draw_angles(rng, clusters.azimuth_mean, clusters.elevation_mean)
    rays = RayBundle(powers=powers, phases=phases, phi=phi, theta=theta)
    if array is Array.BS:
        a = steering_bs(phi, theta, geometry.M, geometry.d_B)
    else:
        a = steering_ris(phi, theta, geometry.N_y, geometry.N_z, geometry.d_R)
    h = np.einsum("cs,csn->n", rays.gains, a)
    return h, rays


@dataclass(frozen=True)
class RisBsChannel:
    los: np.ndarray
    scatter: np.ndarray
    rays: ScatterBundle | None

    @property
    def full(self) -> np.ndarray:
        return self.los + self.scatter


def build_ris_bs_channel(
    geometry: SystemGeometry,
    budget: LinkBudget,
    scatter: ClusterConfig,
    rng: np.random.Generator,
) -> RisBsChannel:
    """Known rank-1 specular part plus unknown ray-based scatter.

    The scatter cluster centers sit at the LoS angles on each side. A pure-LoS
    budget returns an all-zero scatter matrix without consuming ``rng``.
    """
    g = geometry
    los = np.sqrt(budget.beta_bar_BR) * np.outer(g.a_B_los(), g.a_R_los().conj())
    if budget.pure_los:
        return RisBsChannel(los=los, scatter=np.zeros_like(los), rays=None)
    powers = scatter.ray_powers(budget.beta_tilde_BR)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=powers.shape)
    phi_B, theta_B = scatter.draw_angles(rng, g.phi_bar_B, g.theta_bar_B)
    phi_R, theta_R = scatter.draw_angles(rng, g.phi_bar_R, g.theta_bar_R)
    rays = ScatterBundle(powers, phases, phi_B, theta_B, phi_R, theta_R)
    a_B = steering_bs(phi_B, theta_B, g.M, g.d_B)
    a_R = steering_ris(phi_R, theta_R, g.N_y, g.N_z, g.d_R)
    H = np.einsum("cs,csm,csn->mn", rays.gains, a_B, a_R.conj())
    return RisBsChannel(los=los, scatter=H, rays=rays)


def total_channel(H_BR, Phi_bar, h_RU, h_BU) -> np.ndarray:
    """``H_BR @ Phi_bar @ h_RU + h_BU``; ``Phi_bar`` may be the diagonal only."""
    H_BR = np.asarray(H_BR)
    Phi_bar = np.asarray(Phi_bar)
    phases = np.diagonal(Phi_bar) if Phi_bar.ndim == 2 else Phi_bar
    h_RU = np.asarray(h_RU)
    h_BU = np.asarray(h_BU)
    M, N = H_BR.shape
    if phases.shape != (N,) or h_RU.shape != (N,) or h_BU.shape != (M,):
        raise ValueError(
            f"dimension mismatch: H_BR {H_BR.shape}, Phi_bar {Phi_bar.shape}, "
            f"h_RU {h_RU.shape}, h_BU {h_BU.shape}"
        )
    return H_BR @ (phases * h_RU) + h_BU


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of all three channels with the gains that produced it."""

    h_BU: np.ndarray
    h_RU: np.ndarray
    H_BR: RisBsChannel
    budget: LinkBudget
    rays_BU: RayBundle | None = field(default=None, repr=False)
    rays_RU: RayBundle | None = field(default=None, repr=False)

    @property
    def H_BR_los(self) -> np.ndarray:
        return self.H_BR.los

    @property
    def H_BR_scatter(self) -> np.ndarray:
        return self.H_BR.scatter


def draw_channels(
    geometry: SystemGeometry,
    budget: LinkBudget,
    ue_clusters: ClusterConfig,
    br_clusters: ClusterConfig,
    rng: np.random.Generator,
    blocked_direct: bool = False,
) -> ChannelRealization:
    """Draw ``h_BU``, ``h_RU`` and ``H_BR`` from independent child streams.

    Each link gets its own stream spawned from ``rng`` so that changing one
    link's parameters (e.g. K) leaves the other draws untouched.
    """
    s_bu, s_ru, s_br = rng.spawn(3)
    h_BU, rays_BU = draw_ray_channel(geometry, budget.beta_BU, ue_clusters, Array.BS, s_bu)
    if blocked_direct:
        h_BU = np.zeros_like(h_BU)
    h_RU, rays_RU = draw_ray_channel(geometry, budget.beta_RU, ue_clusters, Array.RIS, s_ru)
    H_BR = build_ris_bs_channel(geometry, budget, br_clusters, s_br)
    return ChannelRealization(h_BU, h_RU, H_BR, budget, rays_BU, rays_RU)
