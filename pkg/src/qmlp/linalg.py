"""Dense Hermitian linear algebra.

Everything in the package works with plain ``numpy`` arrays of shape
``(d, d)``.  The helpers here validate Hermitian symmetry, compute sorted
spectral decompositions and apply scalar functions through the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

#: Eigenvalues at or below this value are treated as belonging to the kernel.
EIGENVALUE_FLOOR = 1e-12

HERMITIAN_TOL = 1e-12


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class SupportError(ValueError):
    """A matrix function was asked to act on a kernel it cannot handle."""


def as_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``a`` as a complex Hermitian array.

    Raises ``ValueError`` if ``a`` is not square or deviates from its
    conjugate transpose by more than ``tol`` (scaled by ``max(1, |a|)``).
    The returned array is exactly Hermitian (symmetrized).
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    return (a + a.conj().T) / 2


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in non-increasing order and matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eig_hermitian(a) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix.

    Eigenvalues come back sorted non-increasing; ties keep the order LAPACK
    produced them in (a stable sort), so the output is deterministic.
    """
    a = as_hermitian(a)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        raise NumericalError(f"eigensolver did not converge (off-diagonal mass {off:.3e})") from exc
    order = np.argsort(-w, kind="stable")
    return SpectralDecomposition(w[order], v[:, order])


def matrix_fn(
    a,
    f: Callable[[np.ndarray], np.ndarray],
    support_policy: str = "strict",
    floor: float = EIGENVALUE_FLOOR,
    singular: bool = False,
) -> np.ndarray:
    """Apply the scalar function ``f`` to a Hermitian matrix through its spectrum.

    Parameters
    ----------
    a : array_like
        Hermitian matrix.
    f : callable
        Vectorized real function of the eigenvalues.
    support_policy : {"strict", "project"}
        Only relevant when ``singular`` is true (``f`` undefined at or below
        zero, e.g. ``log`` or the inverse).  ``"strict"`` raises
        :class:`SupportError` if an eigenvalue is at or below ``floor``;
        ``"project"`` applies ``f`` on the eigenvalues above the floor and
        maps the kernel block to zero.
    singular : bool
        Whether ``f`` needs strictly positive eigenvalues.
    """
    if support_policy not in ("strict", "project"):
        raise ValueError(f"unknown support_policy {support_policy!r}")
    dec = eig_hermitian(a)
    lam, v = dec.eigenvalues, dec.eigenvectors
    if not singular:
        return (v * f(lam)) @ v.conj().T
    keep = lam > floor
    if support_policy == "strict" and not np.all(keep):
        raise SupportError(
            f"eigenvalue {lam.min():.3e} at or below the floor {floor:.0e}"
        )
    vals = np.zeros_like(lam)
    vals[keep] = f(lam[keep])
    return (v * vals) @ v.conj().T


def logm(a, support_policy: str = "strict") -> np.ndarray:
    return matrix_fn(a, np.log, support_policy, singular=True)


def expm(a) -> np.ndarray:
    return matrix_fn(a, np.exp)


def sqrtm_psd(a) -> np.ndarray:
    return matrix_fn(a, lambda x: np.sqrt(np.clip(x, 0.0, None)))


def inv_sqrtm(a, support_policy: str = "strict") -> np.ndarray:
    return matrix_fn(a, lambda x: x**-0.5, support_policy, singular=True)


def inv(a, support_policy: str = "strict") -> np.ndarray:
    return matrix_fn(a, np.reciprocal, support_policy, singular=True)


def trace_norm(a) -> float:
    """Schatten-1 norm: the sum of absolute eigenvalues."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(as_hermitian(a)))))


def op_norm(a) -> float:
    """Operator norm: the largest absolute eigenvalue."""
    return float(np.max(np.abs(np.linalg.eigvalsh(as_hermitian(a)))))


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product ``tr(a^dagger b)``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def projector_onto(vectors: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the span of the given orthonormal columns."""
    return vectors @ vectors.conj().T


def support_projector(a, floor: float = EIGENVALUE_FLOOR) -> np.ndarray:
    dec = eig_hermitian(a)
    return projector_onto(dec.eigenvectors[:, dec.eigenvalues > floor])


def divided_differences(lam: np.ndarray, f, df) -> np.ndarray:
    """Matrix of first divided differences ``(f(x_i)-f(x_j))/(x_i-x_j)``.

    The diagonal (and numerically coincident pairs) uses ``df``.  Combined
    with an eigenbasis this gives the Frechet derivative of a matrix
    function (Daleckii-Krein).
    """
    fl = f(lam)
    dl = lam[:, None] - lam[None, :]
    close = np.abs(dl) <= 1e-10 * np.maximum(1.0, np.abs(lam[:, None]))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (fl[:, None] - fl[None, :]) / dl
    mid = (lam[:, None] + lam[None, :]) / 2
    out[close] = df(mid[close])
    return out


# random test matrices -------------------------------------------------------


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (g + g.conj().T) / 2


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
