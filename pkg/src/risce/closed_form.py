"""Closed-form Stage-1 error covariance and the MDFT optimality certificate.

With a pure-LoS regressor the normal matrix is ``rho [[A, C^H], [C, D]]``
with ``A = M b A_R Omega A_R^H``, ``C = sqrt(b) a_B omega^H A_R^H`` and
``D = tau_1 I`` where ``b`` is the LoS power and ``A_R = diag(a_R)``. Its
inverse ``X / rho`` has rank-1-updated blocks that depend on the design only
through ``Omega``, ``omega`` and ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateDesignError
from .training_design import TrainingDesign

__all__ = [
    "CertificateEntry",
    "CertificateReport",
    "ErrorCovariance",
    "ScatterErrorTerms",
    "covariance_blocks",
    "dft_gap_x11",
    "dft_gap_x22",
    "dft_trace_x11",
    "dft_trace_x22",
    "mdft_trace_x11",
    "mdft_trace_x22",
    "scatter_terms",
    "theorem1_certificate",
]

ALPHA_MIN = 1e-12


@dataclass(frozen=True)
class ErrorCovariance:
    X11: np.ndarray
    X21: np.ndarray
    X22: np.ndarray
    A: np.ndarray
    C: np.ndarray
    D: np.ndarray
    rho: float = 1.0

    @property
    def tr_X11(self) -> float:
        return float(np.real(np.trace(self.X11)))

    @property
    def tr_X22(self) -> float:
        return float(np.real(np.trace(self.X22)))

    def assembled(self) -> np.ndarray:
        """The full block matrix ``X``."""
        return np.block([[self.X11, self.X21.conj().T], [self.X21, self.X22]])

    def noise_covariance(self) -> np.ndarray:
        """``X / rho``, the covariance of the processed-noise error."""
        return self.assembled() / self.rho


def _solves(design: TrainingDesign):
    Oi = np.linalg.solve(design.Omega, np.eye(design.N_prime))
    Oi_w = np.linalg.solve(design.Omega, design.omega)
    return Oi, Oi_w


def covariance_blocks(design: TrainingDesign, M: int, beta_bar: float, a_B_los, a_R_los,
                      rho: float = 1.0) -> ErrorCovariance:
    """Blocks ``X11``, ``X21``, ``X22`` of ``X`` in closed form.

    ``a_R_los`` is the LoS RIS steering vector restricted to the active
    elements. Both steering vectors must be unit modulus.

    Raises:
        DegenerateDesignError: if ``alpha <= 1e-12``.
    """
    alpha = design.alpha
    if alpha <= ALPHA_MIN:
        raise DegenerateDesignError(f"alpha = {alpha:.3g}; C^H D^-1 C cancels A")
    a_B = np.asarray(a_B_los, dtype=complex)
    a_R = np.asarray(a_R_los, dtype=complex)
    if a_B.shape != (M,) or a_R.shape != (design.N_prime,):
        raise ValueError("steering vector sizes do not match M and the design")
    tau_1 = design.tau_1
    omega = design.omega
    Oi, Oi_w = _solves(design)
    q = float(np.real(omega.conj() @ Oi_w))

    def rotate(Z):
        # A_R Z A_R^H
        return a_R[:, None] * Z * a_R.conj()[None, :]

    X11 = rotate(Oi + np.outer(Oi_w, Oi_w.conj()) / alpha) / (M * beta_bar)
    X21 = -np.outer(a_B, Oi_w.conj() * a_R.conj()) / (alpha * M * np.sqrt(beta_bar))
    X22 = (np.eye(M) + q / (M * alpha) * np.outer(a_B, a_B.conj())) / tau_1
    A = M * beta_bar * rotate(design.Omega)
    C = np.sqrt(beta_bar) * np.outer(a_B, omega.conj() * a_R.conj())
    D = tau_1 * np.eye(M)
    return ErrorCovariance(X11, X21, X22, A, C, D, rho)


def mdft_trace_x11(M: int, N_prime: int, beta_bar: float) -> float:
    return N_prime / (M * beta_bar * (N_prime + 1))


def mdft_trace_x22(M: int, N_prime: int) -> float:
    return M / (N_prime + 1)


def _first_entry(w) -> complex:
    w1 = complex(np.ravel(np.asarray(w, dtype=complex))[0])
    if abs(abs(w1) - 1.0) > 1e-12:
        raise ValueError("w_1 must be unit modulus")
    if abs(w1.real - 1.0) < 1e-15:
        raise ValueError("w_1 = 1 repeats the first DFT column; the trace has a pole there")
    return w1


def dft_trace_x11(M: int, N_prime: int, beta_bar: float, w1) -> float:
    """``tr(X11)`` of the DFT-plus-one-column design; depends on ``w`` only via ``w_1``."""
    w1 = _first_entry(w1)
    return (1.0 - 1.0 / N_prime - 1.0 / (w1.real - 1.0)) / (M * beta_bar)


def dft_trace_x22(M: int, N_prime: int, w) -> float:
    """``tr(X22)`` of the DFT-plus-one-column design.

    Minimized at ``w_1 = -1`` where it equals ``(tau_1 M + (N'^2 - 1)/2) / tau_1^2``.
    """
    w1 = _first_entry(w)
    return (M + (N_prime + w1.real) / (1.0 - w1.real)) / (N_prime + 1)


def dft_gap_x11(M: int, N_prime: int, beta_bar: float) -> float:
    """How far the best DFT design sits above MDFT in ``tr(X11)``."""
    return (0.5 - 1.0 / (N_prime * (N_prime + 1))) / (M * beta_bar)


def dft_gap_x22(N_prime: int) -> float:
    return 0.5 - 1.0 / (N_prime + 1)


@dataclass(frozen=True)
class ScatterErrorTerms:
    Lambda: np.ndarray
    Y11: np.ndarray
    Y22: np.ndarray

    @property
    def tr_Y11(self) -> float:
        return float(np.vdot(self.Y11, self.Y11).real)

    @property
    def tr_Y22(self) -> float:
        return float(np.vdot(self.Y22, self.Y22).real)


def scatter_terms(H_BR_scatter_active, h_RU_active, design: TrainingDesign, beta_bar: float,
                  M: int, a_B_los, a_R_los) -> ScatterErrorTerms:
    """Error from the unknown RIS-BS scatter, split into RU and BU blocks.

    ``Y11`` does not involve the design at all; ``Y22`` is proportional to
    ``conj(omega)`` and so vanishes for MDFT.
    """
    Hs = np.asarray(H_BR_scatter_active)
    h = np.asarray(h_RU_active)
    a_B = np.asarray(a_B_los)
    a_R = np.asarray(a_R_los)
    Hs_h = Hs * h[None, :]
    Lam = a_B.conj() @ Hs_h
    Y11 = a_R * Lam / np.sqrt(M ** 2 * beta_bar)
    Y22 = (M * Hs_h - np.outer(a_B, Lam)) @ design.omega.conj() / (design.tau_1 * M)
    return ScatterErrorTerms(Lam, Y11, Y22)


@dataclass(frozen=True)
class CertificateEntry:
    label: str
    kind: str
    tr_X11: float
    tr_X22: float
    omega_inv_trace: float
    bound: float
    tr_Y11: float | None = None
    tr_Y22: float | None = None
    rank: int = 0

    @property
    def trace_sum(self) -> float:
        return self.tr_X11 + self.tr_X22

    @property
    def bound_gap(self) -> float:
        """``tr(Omega^{-1}) - N'/tau_1``; never negative for unit-modulus designs."""
        return self.omega_inv_trace - self.bound

    @property
    def objective(self) -> float:
        """Ranking objective; ``tr(Y11 Y11^H)`` is design independent and left out."""
        return self.trace_sum + (self.tr_Y22 or 0.0)


@dataclass(frozen=True)
class CertificateReport:
    entries: list[CertificateEntry] = field(default_factory=list)
    N_prime: int = 0
    tau_1: int = 0

    @property
    def winner(self) -> CertificateEntry:
        return min(self.entries, key=lambda e: (e.objective, e.rank))

    @property
    def mdft_is_minimum(self) -> bool:
        md = [e for e in self.entries if e.kind == "MDFT"]
        if not md:
            return False
        best = min(e.objective for e in self.entries)
        return min(e.objective for e in md) <= best


def theorem1_certificate(designs, M: int, beta_bar: float, labels=None, a_B_los=None,
                         a_R_los=None, scatter_draws=None) -> CertificateReport:
    """Rank training designs by the sum of Stage-1 error variances.

    Args:
        designs: training designs sharing ``N'`` and ``tau_1``.
        M: BS antenna count.
        beta_bar: LoS power of the RIS-BS channel.
        labels: optional display names, one per design.
        a_B_los, a_R_los: LoS steering vectors; the traces do not depend on
            them, so all-ones vectors are used when omitted.
        scatter_draws: optional iterable of ``(H_scatter_active, h_RU_active)``
            pairs; the mean ``tr(Y11 Y11^H)`` and ``tr(Y22 Y22^H)`` over them
            are reported.
    """
    designs = list(designs)
    if not designs:
        raise ValueError("no designs supplied")
    shapes = {d.Phi.shape for d in designs}
    if len(shapes) != 1:
        raise ValueError(f"designs must share N' and tau_1, got {sorted(shapes)}")
    N_prime, tau_1 = designs[0].Phi.shape
    labels = list(labels) if labels is not None else [f"{d.kind.value}_{i}" for i, d in enumerate(designs)]
    a_B = np.ones(M, dtype=complex) if a_B_los is None else np.asarray(a_B_los)
    a_R = np.ones(N_prime, dtype=complex) if a_R_los is None else np.asarray(a_R_los)
    draws = list(scatter_draws) if scatter_draws is not None else []
    bound = N_prime / tau_1
    entries = []
    for label, d in zip(labels, designs):
        cov = covariance_blocks(d, M, beta_bar, a_B, a_R)
        y11 = y22 = None
        if draws:
            terms = [scatter_terms(Hs, h, d, beta_bar, M, a_B, a_R) for Hs, h in draws]
            y11 = float(np.mean([t.tr_Y11 for t in terms]))
            y22 = float(np.mean([t.tr_Y22 for t in terms]))
        entries.append(CertificateEntry(label, d.kind.value, cov.tr_X11, cov.tr_X22,
                                        d.omega_inv_trace(), bound, y11, y22))
    order = sorted(range(len(entries)), key=lambda i: (entries[i].objective, i))
    ranked = list(entries)
    for rank, i in enumerate(order, start=1):
        e = entries[i]
        ranked[i] = CertificateEntry(e.label, e.kind, e.tr_X11, e.tr_X22, e.omega_inv_trace,
                                     e.bound, e.tr_Y11, e.tr_Y22, rank)
    return CertificateReport(ranked, N_prime, tau_1)
