"""Two-stage channel estimation.

Stage 1 sends ``tau_1`` pilots while the RIS cycles through the columns of a
training design. Only ``N'`` active elements are estimated, together with
the direct channel, using the known LoS part of the RIS-BS channel. The
remaining elements of each RIS column are interpolated from the active ones.
Stage 2 re-measures the total channel with the transmission phases applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg

from .channel_model import total_channel
from .exceptions import SingularDesignError
from .training_design import COND_LIMIT, TrainingDesign

__all__ = [
    "EstimationOutcome",
    "InterpolationMethod",
    "Stage1Result",
    "Stage2Mode",
    "active_indices",
    "build_vhat",
    "complex_noise",
    "error_components",
    "interpolate",
    "interpolate_column",
    "lmmse_estimate",
    "row_abscissae",
    "run_stage1",
    "stack_received",
    "stage1_total_estimate",
    "stage2_measurements",
    "stage2_refine",
]


class InterpolationMethod(str, Enum):
    ONE_PT = "ONE_PT"
    TWO_PT = "TWO_PT"
    THREE_PT = "THREE_PT"
    NZ_PT = "NZ_PT"

    @property
    def label(self) -> str:
        return {"ONE_PT": "1-pt", "TWO_PT": "2-pt", "THREE_PT": "3-pt", "NZ_PT": "Nz-pt"}[self.value]

    def active_rows(self, N_z: int) -> list[int]:
        """0-based rows estimated in every column."""
        mid = (N_z - 1) // 2
        if self is InterpolationMethod.ONE_PT:
            return [mid]
        if self is InterpolationMethod.TWO_PT:
            if N_z < 2:
                raise ValueError("TWO_PT interpolation needs N_z >= 2")
            return [0, N_z - 1]
        if self is InterpolationMethod.THREE_PT:
            if N_z < 3:
                raise ValueError("THREE_PT interpolation needs N_z >= 3")
            return [0, mid, N_z - 1]
        return list(range(N_z))

    def n_active(self, N_y: int, N_z: int) -> int:
        return N_y * len(self.active_rows(N_z))


class Stage2Mode(str, Enum):
    REFINE = "REFINE"
    REESTIMATE = "REESTIMATE"


def active_indices(method: InterpolationMethod | str, N_y: int, N_z: int) -> np.ndarray:
    """0-based RIS element indices of the active elements, column by column.

    The middle row of an even-length column is row ``N_z/2`` counted from 1.
    """
    rows = InterpolationMethod(method).active_rows(N_z)
    return np.array([y * N_z + z for y in range(N_y) for z in rows], dtype=int)


def complex_noise(rng: np.random.Generator, size) -> np.ndarray:
    """Samples of CN(0, 1)."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def stack_received(H_BR_active, design: TrainingDesign, h_RU_active, h_BU, rho: float,
                   rng: np.random.Generator | None = None, noise=None) -> np.ndarray:
    """Stacked Stage-1 observations ``r = V [h_RU'; h_BU] + n`` of length ``M tau_1``.

    Block ``t`` of ``r`` holds the ``M`` antennas for pilot ``t``. Pass either
    ``rng`` to draw CN(0, I) noise, ``noise`` to supply it, or neither for a
    noiseless observation.
    """
    H = np.asarray(H_BR_active)
    M, Np = H.shape
    h_RU_active = np.asarray(h_RU_active)
    h_BU = np.asarray(h_BU)
    if design.Phi.shape[0] != Np or h_RU_active.shape != (Np,) or h_BU.shape != (M,):
        raise ValueError("dimension mismatch between H_BR', design, h_RU' and h_BU")
    Y = np.sqrt(rho) * (H @ (design.Phi * h_RU_active[:, None]) + h_BU[:, None])
    r = Y.T.reshape(-1)
    if noise is not None:
        noise = np.asarray(noise)
        if noise.shape != r.shape:
            raise ValueError(f"noise must have shape {r.shape}")
        r = r + noise
    elif rng is not None:
        r = r + complex_noise(rng, r.shape)
    return r


def build_vhat(H_BR_los_active, design: TrainingDesign, rho: float) -> np.ndarray:
    """Stacked regressor whose block rows are ``sqrt(rho) [H' Psi_t, I_M]``."""
    H = np.asarray(H_BR_los_active)
    M, Np = H.shape
    if design.Phi.shape[0] != Np:
        raise ValueError("design size does not match the number of active columns")
    tau_1 = design.tau_1
    left = (H[None, :, :] * design.Phi.T[:, None, :]).reshape(tau_1 * M, Np)
    right = np.tile(np.eye(M), (tau_1, 1))
    return np.sqrt(rho) * np.hstack([left, right])


def _normal_solve(V_hat, rhs):
    G = V_hat.conj().T @ V_hat
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularDesignError(f"V^H V is numerically singular (condition {cond:.3g})")
    try:
        factor = linalg.cho_factor(G)
    except linalg.LinAlgError as exc:
        raise SingularDesignError("V^H V is not positive definite") from exc
    return linalg.cho_solve(factor, rhs)


def lmmse_estimate(V_hat, r, M: int):
    """Solve ``(V^H V) x = V^H r`` and split ``x`` into ``(h_RU', h_BU)``.

    ``M`` is the BS antenna count; the first ``cols - M`` entries of ``x`` are
    the active-element estimates.

    Raises:
        SingularDesignError: if ``V^H V`` is numerically singular.
    """
    V_hat = np.asarray(V_hat)
    x = _normal_solve(V_hat, V_hat.conj().T @ np.asarray(r))
    n_active = V_hat.shape[1] - M
    return x[:n_active], x[n_active:]


def error_components(V_hat, V_true, h_stacked, noise):
    """Split the estimation error into the scattering part and the noise part.

    Returns ``(eps1, eps2)`` with ``eps1 = (V^H V)^{-1} V^H (V_true - V_hat) h``
    and ``eps2 = (V^H V)^{-1} V^H n``.
    """
    V_hat = np.asarray(V_hat)
    eps1 = _normal_solve(V_hat, V_hat.conj().T @ ((np.asarray(V_true) - V_hat) @ h_stacked))
    eps2 = _normal_solve(V_hat, V_hat.conj().T @ np.asarray(noise))
    return eps1, eps2


def row_abscissae(N_z: int) -> np.ndarray:
    """Physical row positions normalized to ``[-1, 1]``."""
    if N_z == 1:
        return np.zeros(1)
    return 2.0 * np.arange(N_z) / (N_z - 1) - 1.0


def interpolate_column(values, method: InterpolationMethod | str, N_z: int) -> np.ndarray:
    """Rebuild one RIS column of length ``N_z`` from its active estimates.

    ONE_PT repeats the middle estimate, TWO_PT is complex-linear between the
    top and bottom rows, THREE_PT fits the quadratic through top, middle and
    bottom at their physical row positions, NZ_PT returns the values as-is.
    """
    method = InterpolationMethod(method)
    values = np.asarray(values, dtype=complex)
    rows = method.active_rows(N_z)
    if values.shape != (len(rows),):
        raise ValueError(f"{method.value} expects {len(rows)} values per column, got {values.shape}")
    if method is InterpolationMethod.NZ_PT:
        return values.copy()
    if method is InterpolationMethod.ONE_PT:
        return np.full(N_z, values[0])
    t = row_abscissae(N_z)
    if method is InterpolationMethod.TWO_PT:
        top, bottom = values
        return top + (t + 1.0) / 2.0 * (bottom - top)
    return _quadratic_through(t[rows], values, t)


def _quadratic_through(t_known, v_known, t_eval):
    # Lagrange form; exact for any complex quadratic in t
    t0, t1, t2 = t_known
    v0, v1, v2 = v_known
    l0 = (t_eval - t1) * (t_eval - t2) / ((t0 - t1) * (t0 - t2))
    l1 = (t_eval - t0) * (t_eval - t2) / ((t1 - t0) * (t1 - t2))
    l2 = (t_eval - t0) * (t_eval - t1) / ((t2 - t0) * (t2 - t1))
    return v0 * l0 + v1 * l1 + v2 * l2


def interpolate(h_RU_active, method: InterpolationMethod | str, N_y: int, N_z: int) -> np.ndarray:
    """Full length-``N`` UE-RIS estimate from the active-element estimates."""
    method = InterpolationMethod(method)
    per_col = len(method.active_rows(N_z))
    h = np.asarray(h_RU_active, dtype=complex)
    if h.shape != (N_y * per_col,):
        raise ValueError(f"expected {N_y * per_col} active estimates, got {h.shape}")
    cols = h.reshape(N_y, per_col)
    return np.concatenate([interpolate_column(c, method, N_z) for c in cols])


def stage1_total_estimate(H_BR_los, Phi_bar, h_RU_hat, h_BU_hat) -> np.ndarray:
    """``H_los Phi_bar h_RU_hat + h_BU_hat``; the BS only knows the LoS part."""
    return total_channel(H_BR_los, Phi_bar, h_RU_hat, h_BU_hat)


def stage2_measurements(h_TOT, tau_2: int, rho: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """``(tau_2, M)`` array of ``sqrt(rho) h_TOT + n_t``; noiseless without ``rng``."""
    h_TOT = np.asarray(h_TOT)
    y = np.sqrt(rho) * np.broadcast_to(h_TOT, (tau_2, h_TOT.size))
    if rng is not None:
        y = y + complex_noise(rng, y.shape)
    return np.array(y)


def stage2_refine(h_TOT_tau1, y, rho: float, mode: Stage2Mode | str) -> np.ndarray:
    """Combine the Stage-1 estimate with ``tau_2`` Stage-2 measurements.

    REFINE weights them ``[1, tau_2] / (tau_2 + 1)``; REESTIMATE discards the
    Stage-1 estimate and averages the measurements.
    """
    mode = Stage2Mode(mode)
    y = np.asarray(y).reshape(-1, np.asarray(h_TOT_tau1).size)
    tau_2 = y.shape[0]
    if tau_2 == 0:
        if mode is Stage2Mode.REESTIMATE:
            raise ValueError("REESTIMATE needs tau_2 >= 1")
        return np.array(h_TOT_tau1, dtype=complex)
    if mode is Stage2Mode.REFINE:
        w1, w2 = 1.0 / (tau_2 + 1), tau_2 / (tau_2 + 1)
    else:
        w1, w2 = 0.0, 1.0
    return w1 * np.asarray(h_TOT_tau1) + w2 / (tau_2 * np.sqrt(rho)) * y.sum(axis=0)


@dataclass(frozen=True)
class Stage1Result:
    h_RU_active_hat: np.ndarray
    h_BU_hat: np.ndarray
    h_RU_hat: np.ndarray
    active: np.ndarray
    eps1: np.ndarray | None = None
    eps2: np.ndarray | None = None


def run_stage1(
    H_BR_los,
    H_BR_full,
    h_RU,
    h_BU,
    design: TrainingDesign,
    method: InterpolationMethod | str,
    N_y: int,
    N_z: int,
    rho: float,
    rng: np.random.Generator | None = None,
    with_errors: bool = False,
) -> Stage1Result:
    """Observe, estimate and interpolate; ``rng=None`` gives noiseless pilots.

    With ``with_errors`` the error split ``(eps1, eps2)`` against the true
    channels is returned too (diagnostics only).
    """
    method = InterpolationMethod(method)
    idx = active_indices(method, N_y, N_z)
    if design.N_prime != idx.size:
        raise ValueError(f"{method.value} needs a design with N' = {idx.size}")
    H_los_a = np.asarray(H_BR_los)[:, idx]
    H_full_a = np.asarray(H_BR_full)[:, idx]
    h_RU_a = np.asarray(h_RU)[idx]
    M = H_los_a.shape[0]
    noise = np.zeros(M * design.tau_1, dtype=complex) if rng is None else complex_noise(rng, M * design.tau_1)
    r = stack_received(H_full_a, design, h_RU_a, h_BU, rho, noise=noise)
    V_hat = build_vhat(H_los_a, design, rho)
    h_RU_a_hat, h_BU_hat = lmmse_estimate(V_hat, r, M)
    eps1 = eps2 = None
    if with_errors:
        V_true = build_vhat(H_full_a, design, rho)
        eps1, eps2 = error_components(V_hat, V_true, np.concatenate([h_RU_a, h_BU]), noise)
    h_RU_hat = interpolate(h_RU_a_hat, method, N_y, N_z)
    return Stage1Result(h_RU_a_hat, h_BU_hat, h_RU_hat, idx, eps1, eps2)


@dataclass(frozen=True)
class EstimationOutcome:
    """Everything one pass of the two-stage protocol produced."""

    h_RU_active_hat: np.ndarray
    h_BU_hat: np.ndarray
    h_RU_hat: np.ndarray
    h_TOT_tau1: np.ndarray
    h_TOT_tau: np.ndarray
    rho: float
    tau_1: int
    tau_2: int
    eps1: np.ndarray | None = None
    eps2: np.ndarray | None = None
