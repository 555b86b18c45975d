"""Structured additive noise with a prescribed operator norm."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralMatrix, centro_reflect

__all__ = ["NoiseSpec", "make_noise", "operator_norm", "symmetrize"]


@dataclass(frozen=True)
class NoiseSpec:
    delta: float
    seed: int = 0

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError(f"noise level must be non-negative, got {self.delta}")


def operator_norm(M, tol: float = 1e-12) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    E = np.asarray(M)
    scale = max(1.0, float(np.abs(E).max(initial=0.0)))
    if np.abs(E - E.conj().T).max(initial=0.0) > tol * scale:
        raise ValueError("operator_norm expects a Hermitian matrix")
    if E.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvalsh(E)).max())


def symmetrize(E: np.ndarray) -> np.ndarray:
    """Hermitian part followed by the centrohermitian part."""
    E = 0.5 * (E + E.conj().T)
    return 0.5 * (E + centro_reflect(E))


def make_noise(A, spec: NoiseSpec) -> SpectralMatrix:
    """Noise matrix ``E`` with ``||E|| = spec.delta``, shaped by the datum ``A``.

    Standard normal entries (independent real and imaginary parts) are
    symmetrized, multiplied entrywise by ``A`` and rescaled to the requested
    operator norm.
    """
    A = np.asarray(A, dtype=complex)
    if spec.delta == 0:
        return SpectralMatrix(np.zeros_like(A))
    if not np.any(A):
        raise ValueError("cannot scale noise by a zero datum")
    rng = np.random.default_rng(spec.seed)
    E1 = rng.standard_normal(A.shape) + 1j * rng.standard_normal(A.shape)
    E4 = symmetrize(E1) * A
    # the entrywise product of two Hermitian centrohermitian matrices is again both
    E4 = symmetrize(E4)
    norm = operator_norm(E4)
    if norm == 0:
        raise ValueError("noise realization vanished after shaping")
    return SpectralMatrix(spec.delta / norm * E4, meta={"delta": spec.delta, "seed": spec.seed})
