"""Training phase matrices for Stage 1 and their accumulators.

A design is an ``N' x tau_1`` matrix ``Phi`` whose column ``t`` holds the RIS
phases applied while pilot ``t`` is sent. The error covariance depends on the
design only through

* ``Omega = sum_t conj(psi_t) psi_t^T``
* ``omega = sum_t conj(psi_t)``
* ``alpha = tau_1 - omega^H Omega^{-1} omega``
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import SingularDesignError

__all__ = [
    "DesignKind",
    "TrainingDesign",
    "accumulators",
    "dft_plus_matrix",
    "identity_matrix",
    "make_design",
    "mdft_matrix",
    "random_phase_matrix",
]

COND_LIMIT = 1e12


class DesignKind(str, Enum):
    MDFT = "MDFT"
    DFT_PLUS = "DFT_PLUS"
    RANDOM = "RANDOM"
    IDENTITY = "IDENTITY"


def accumulators(Phi) -> tuple[np.ndarray, np.ndarray, float]:
    """Return ``(Omega, omega, alpha)`` for the training matrix ``Phi``.

    Raises:
        SingularDesignError: if ``Omega`` has condition number above 1e12.
    """
    Phi = np.asarray(Phi, dtype=complex)
    if Phi.ndim != 2 or Phi.size == 0:
        raise ValueError("Phi must be a non-empty 2-D matrix")
    Omega = Phi.conj() @ Phi.T
    omega = Phi.conj().sum(axis=1)
    cond = np.linalg.cond(Omega)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularDesignError(f"Omega is numerically singular (condition {cond:.3g})")
    alpha = Phi.shape[1] - np.real(omega.conj() @ np.linalg.solve(Omega, omega))
    return Omega, omega, float(alpha)


@dataclass(frozen=True)
class TrainingDesign:
    Phi: np.ndarray
    kind: DesignKind
    Omega: np.ndarray
    omega: np.ndarray
    alpha: float

    @classmethod
    def from_phi(cls, Phi, kind: DesignKind | str) -> "TrainingDesign":
        Phi = np.asarray(Phi, dtype=complex)
        Omega, omega, alpha = accumulators(Phi)
        return cls(Phi=Phi, kind=DesignKind(kind), Omega=Omega, omega=omega, alpha=alpha)

    @property
    def N_prime(self) -> int:
        return self.Phi.shape[0]

    @property
    def tau_1(self) -> int:
        return self.Phi.shape[1]

    def omega_inv_trace(self) -> float:
        """``tr(Omega^{-1})``, bounded below by ``N'/tau_1`` for unit-modulus designs."""
        return float(np.real(np.trace(np.linalg.solve(self.Omega, np.eye(self.N_prime)))))


def mdft_matrix(N_prime: int) -> TrainingDesign:
    """Last ``N'`` rows of the ``(N'+1)``-point DFT matrix; ``Omega = (N'+1) I``.

    The accumulators are stored in their exact form so that ``omega`` is
    identically zero rather than zero up to rounding.
    """
    if N_prime < 1:
        raise ValueError("N_prime must be >= 1")
    x = 2 * np.pi / (N_prime + 1)
    n = np.arange(1, N_prime + 1)
    t = np.arange(N_prime + 1)
    Phi = np.exp(1j * x * np.outer(n, t))
    tau_1 = N_prime + 1
    return TrainingDesign(Phi, DesignKind.MDFT, tau_1 * np.eye(N_prime, dtype=complex),
                          np.zeros(N_prime, dtype=complex), float(tau_1))


def dft_plus_matrix(N_prime: int, w=None) -> TrainingDesign:
    """``N' x N'`` DFT columns followed by one extra column ``w`` (default all -1)."""
    if N_prime < 1:
        raise ValueError("N_prime must be >= 1")
    w = -np.ones(N_prime, dtype=complex) if w is None else np.asarray(w, dtype=complex)
    if w.shape != (N_prime,):
        raise ValueError(f"w must have length {N_prime}")
    if np.max(np.abs(np.abs(w) - 1.0)) > 1e-12:
        raise ValueError("extra DFT column w must be unit modulus")
    k = np.arange(N_prime)
    W = np.exp(2j * np.pi * np.outer(k, k) / N_prime)
    return TrainingDesign.from_phi(np.column_stack([W, w]), DesignKind.DFT_PLUS)


def random_phase_matrix(N_prime: int, rng: np.random.Generator, tau_1: int | None = None) -> TrainingDesign:
    """IID uniform phases; ``tau_1`` defaults to ``N' + 1``."""
    tau_1 = N_prime + 1 if tau_1 is None else tau_1
    phases = rng.uniform(0.0, 2 * np.pi, size=(N_prime, tau_1))
    return TrainingDesign.from_phi(np.exp(1j * phases), DesignKind.RANDOM)


def identity_matrix(N_prime: int, tau_1: int | None = None) -> TrainingDesign:
    """An all-off pilot for ``h_BU`` followed by one active element per pilot.

    ``tau_1 <= N'`` keeps only the first ``tau_1`` columns of the identity,
    which cannot separate the direct channel (and for ``tau_1 < N'`` leaves
    elements unobserved); the stacked problem is then singular.
    """
    tau_1 = N_prime + 1 if tau_1 is None else tau_1
    if tau_1 > N_prime + 1:
        raise ValueError("identity training supports at most N' + 1 pilots")
    if tau_1 == N_prime + 1:
        Phi = np.column_stack([np.zeros(N_prime), np.eye(N_prime)])
    else:
        Phi = np.eye(N_prime)[:, :tau_1]
    return TrainingDesign.from_phi(Phi, DesignKind.IDENTITY)


def make_design(kind: DesignKind | str, N_prime: int, rng: np.random.Generator | None = None) -> TrainingDesign:
    kind = DesignKind(kind)
    if kind is DesignKind.MDFT:
        return mdft_matrix(N_prime)
    if kind is DesignKind.DFT_PLUS:
        return dft_plus_matrix(N_prime)
    if kind is DesignKind.IDENTITY:
        return identity_matrix(N_prime)
    if rng is None:
        raise ValueError("random designs need an rng")
    return random_phase_matrix(N_prime, rng)
