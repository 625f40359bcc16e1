"""Density operators, pinching, POVMs and probability vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import (
    EIGENVALUE_FLOOR,
    SpectralDecomposition,
    as_hermitian,
    eig_hermitian,
    op_norm,
    random_unitary,
)

PSD_TOL = 1e-10
TRACE_TOL = 1e-10
#: Largest negative eigenvalue mass that may be clipped away silently.
MAX_CLIPPED_MASS = 1e-9


def as_density(rho, tol: float = PSD_TOL) -> np.ndarray:
    """Validate a density operator and clean numerical dust.

    Negative eigenvalues within ``tol`` are clipped to zero and the state is
    renormalized.  Raises ``ValueError`` if the matrix is not PSD within
    ``tol``, the clipped mass exceeds ``MAX_CLIPPED_MASS`` or the trace is
    off by more than ``TRACE_TOL``.
    """
    rho = as_hermitian(rho)
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"trace is {tr!r}, expected 1")
    dec = eig_hermitian(rho)
    lam = dec.eigenvalues
    if lam[-1] < -tol:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {lam[-1]:.3e})")
    if lam[-1] >= 0:
        return rho
    clipped = float(-lam[lam < 0].sum())
    if clipped > MAX_CLIPPED_MASS:
        raise ValueError(f"clipping would remove mass {clipped:.3e}")
    lam = np.clip(lam, 0.0, None)
    lam = lam / lam.sum()
    v = dec.eigenvectors
    out = (v * lam) @ v.conj().T
    return (out + out.conj().T) / 2


def is_density(rho, tol: float = PSD_TOL) -> bool:
    try:
        as_density(rho, tol)
    except ValueError:
        return False
    return True


def maximally_mixed(d: int) -> np.ndarray:
    if d < 1:
        raise ValueError("dimension must be positive")
    return np.eye(d, dtype=complex) / d


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def basis_matrix(basis) -> np.ndarray:
    """Columns of an orthonormal basis from a decomposition or an array."""
    if isinstance(basis, SpectralDecomposition):
        return basis.eigenvectors
    return np.asarray(basis, dtype=complex)


def check_orthonormal(v: np.ndarray, tol: float = 1e-10) -> None:
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError("basis must be a square matrix of column vectors")
    if np.max(np.abs(v.conj().T @ v - np.eye(v.shape[0]))) > tol:
        raise ValueError("basis is not orthonormal")


def pinch(sigma, basis) -> np.ndarray:
    """Rank-one pinching of ``sigma`` in an orthonormal basis.

    Keeps the diagonal of ``sigma`` expressed in ``basis`` and zeroes the
    rest: ``sum_i |e_i><e_i| sigma |e_i><e_i|``.  ``basis`` is either a
    :class:`SpectralDecomposition` or a matrix whose columns are the basis
    vectors.
    """
    v = basis_matrix(basis)
    check_orthonormal(v)
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.shape != v.shape:
        raise ValueError(f"dimension mismatch: {sigma.shape} vs basis {v.shape}")
    diag = np.einsum("ji,jk,ki->i", v.conj(), sigma, v).real
    return (v * diag) @ v.conj().T


def pinch_operator(a, basis) -> np.ndarray:
    """Pinching applied to an arbitrary Hermitian operator (no state checks)."""
    v = basis_matrix(basis)
    diag = np.einsum("ji,jk,ki->i", v.conj(), np.asarray(a, dtype=complex), v).real
    return (v * diag) @ v.conj().T


@dataclass(frozen=True)
class ProbabilityVector:
    """A probability mass function over ``len(weights)`` outcomes."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "weights", w)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def __len__(self) -> int:
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)


def as_pmf(p, tol: float = 1e-12) -> np.ndarray:
    """Validate a pmf given as a sequence or :class:`ProbabilityVector`."""
    if isinstance(p, ProbabilityVector):
        return p.weights
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("pmf must be a non-empty vector")
    if np.any(p < 0):
        raise ValueError("pmf has negative entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"pmf sums to {p.sum()!r}, expected 1")
    return p


@dataclass(frozen=True)
class Povm:
    """A finite POVM: PSD elements summing to the identity."""

    elements: tuple
    labels: tuple = field(default=())

    def __post_init__(self):
        elems = tuple(as_hermitian(m) for m in self.elements)
        if not elems:
            raise ValueError("POVM needs at least one element")
        d = elems[0].shape[0]
        for m in elems:
            if m.shape != (d, d):
                raise ValueError("POVM elements have inconsistent dimensions")
            if np.linalg.eigvalsh(m)[0] < -PSD_TOL:
                raise ValueError("POVM element is not positive semidefinite")
        if op_norm(sum(elems) - np.eye(d)) > 1e-10:
            raise ValueError("POVM elements do not sum to the identity")
        labels = tuple(self.labels) if self.labels else tuple(range(len(elems)))
        if len(labels) != len(elems):
            raise ValueError("one label per element required")
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)


def basis_povm(basis) -> Povm:
    """Projective measurement in an orthonormal basis."""
    v = basis_matrix(basis)
    check_orthonormal(v)
    return Povm(tuple(np.outer(v[:, i], v[:, i].conj()) for i in range(v.shape[1])))


def computational_povm(d: int) -> Povm:
    return basis_povm(np.eye(d, dtype=complex))


def random_basis_povm(d: int, rng: np.random.Generator) -> Povm:
    return basis_povm(random_unitary(d, rng))


def measure(rho, povm: Povm) -> np.ndarray:
    """Born-rule outcome probabilities ``tr(M_z rho)``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (povm.dim, povm.dim):
        raise ValueError("state and POVM dimensions differ")
    p = np.array([np.vdot(m, rho).real for m in povm.elements])
    p = np.clip(p, 0.0, None)
    s = p.sum()
    if abs(s - 1.0) > 1e-10:
        raise ValueError(f"outcome probabilities sum to {s!r}")
    return p / s


def spectrum_pmf(rho) -> np.ndarray:
    """Eigenvalues of a state as a pmf, sorted non-increasing."""
    lam = eig_hermitian(rho).eigenvalues
    clipped = lam.copy()
    clipped[clipped <= EIGENVALUE_FLOOR] = 0.0
    removed = abs(lam.sum() - clipped.sum())
    if removed > MAX_CLIPPED_MASS:
        raise ValueError(f"spectrum floor removed mass {removed:.3e}")
    return clipped / clipped.sum()


def support_leq(rho, sigma, tol: float = 1e-8) -> bool:
    """Whether ``spt(rho)`` is contained in ``spt(sigma)``."""
    dr = eig_hermitian(rho)
    ds = eig_hermitian(sigma)
    vr = dr.eigenvectors[:, dr.eigenvalues > EIGENVALUE_FLOOR]
    vs = ds.eigenvectors[:, ds.eigenvalues > EIGENVALUE_FLOOR]
    if vr.shape[1] == 0:
        return True
    # component of spt(rho) outside spt(sigma)
    resid = vr - vs @ (vs.conj().T @ vr)
    return float(np.linalg.norm(resid, 2)) <= tol


def random_density(
    d: int,
    rng: np.random.Generator,
    rank: int | None = None,
    mix: float = 0.0,
) -> np.ndarray:
    """Random state from a complex Ginibre matrix.

    ``mix`` blends in the maximally mixed state to keep the spectrum away
    from zero, which the full-support test families rely on.
    """
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    if mix:
        rho = (1 - mix) * rho + mix * maximally_mixed(d)
    return (rho + rho.conj().T) / 2


def random_spectrum_state(
    eigenvalues: Sequence[float], rng: np.random.Generator
) -> np.ndarray:
    """State with a prescribed spectrum in a Haar-random basis."""
    lam = np.asarray(eigenvalues, dtype=float)
    u = random_unitary(lam.size, rng)
    rho = (u * lam) @ u.conj().T
    return (rho + rho.conj().T) / 2
