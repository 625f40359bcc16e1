"""Checks of the structural identities linking quantum and classical prediction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .divergences import kl, qre
from .linalg import SpectralDecomposition, eig_hermitian, trace_norm
from .models import ExponentialFamily, FiniteSet, FixedBasisDiagonal, Full, SpectralFloor
from .solve import classical_mlp, qmlp
from .states import as_density, basis_matrix, pinch, spectrum_pmf

PinchFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _same_basis_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> bool:
    """Whether the columns of ``a`` and ``b`` span the same rank-one projectors
    (in some order)."""
    overlap = np.abs(a.conj().T @ b)
    return bool(np.all(np.abs(overlap.max(axis=1) - 1.0) <= tol) and np.all(np.abs(overlap.max(axis=0) - 1.0) <= tol))


def pinch_class(model, basis, pinch_fn: PinchFn = pinch) -> Optional[bool]:
    """Whether pinching in ``basis`` maps the model class into itself.

    Returns ``True``/``False``, or ``None`` when the answer is not known
    (exponential families).
    """
    v = basis_matrix(basis)
    if v.shape != (model.dim, model.dim):
        raise ValueError("basis and model dimensions differ")
    if isinstance(model, Full):
        return True
    if isinstance(model, SpectralFloor):
        # diagonal entries of sigma in any basis are >= its minimum eigenvalue
        return True
    if isinstance(model, FixedBasisDiagonal):
        return _same_basis_up_to_phase(v, model.basis)
    if isinstance(model, FiniteSet):
        return all(model.contains(pinch_fn(s, v), tol=1e-10) for s in model.states)
    if isinstance(model, ExponentialFamily):
        return None
    raise TypeError(f"unsupported model class {type(model).__name__}")


@dataclass
class Prop1Report:
    quantum_value: float
    classical_value: float
    gap: float

    @property
    def holds(self) -> bool:
        return abs(self.gap) <= 1e-7 or (np.isinf(self.quantum_value) and np.isinf(self.classical_value))


def _diag_in(sigma, v) -> np.ndarray:
    d = np.einsum("ji,jk,ki->i", v.conj(), sigma, v).real
    return np.clip(d, 0.0, None) / np.clip(d, 0.0, None).sum()


def prop1_check(rho, model, pinch_fn: PinchFn = pinch, init=None) -> Prop1Report:
    """Compare the quantum and classical optimal values for one state.

    The quantum value ``min_sigma D(rho||sigma)`` is computed without
    using the spectral reduction (projected gradient over matrices for a
    spectral floor, enumeration of relative entropies for a finite set).
    The classical value minimizes ``kl(lambda_rho, .)`` over the pinched
    class expressed in the eigenbasis of ``rho``.  Raises ``ValueError`` if
    the class is not closed under that pinching.
    """
    rho = as_density(rho)
    dec: SpectralDecomposition = eig_hermitian(rho)
    v = dec.eigenvectors
    verdict = pinch_class(model, v, pinch_fn)
    if verdict is not True:
        raise ValueError("model class is not known to be closed under pinching in rho's eigenbasis")
    lam = spectrum_pmf(rho)

    if isinstance(model, Full):
        quantum = qmlp(rho, model).value
        classical = classical_mlp(lam, "full").value
    elif isinstance(model, SpectralFloor):
        quantum = qmlp(rho, model, method="projected_gradient", init=init).value
        classical = classical_mlp(lam, ("floor", model.delta)).value
    elif isinstance(model, FixedBasisDiagonal):
        quantum = qre(rho, pinch_fn(rho, model.basis))
        # pinched class = all states diagonal in E_rho
        classical = classical_mlp(lam, "full").value
    elif isinstance(model, FiniteSet):
        quantum = min(qre(rho, s) for s in model.states)
        classical = min(kl(lam, _diag_in(pinch_fn(s, v), v)) for s in model.states)
    else:  # pragma: no cover - pinch_class already rejected it
        raise TypeError(type(model).__name__)
    gap = quantum - classical if np.isfinite(quantum) or np.isfinite(classical) else 0.0
    return Prop1Report(quantum, classical, gap)


@dataclass
class Prop3Report:
    lhs1: float
    rhs1: float
    lhs2: float
    rhs2: float
    epsilon: float

    @property
    def slack1(self) -> float:
        return self.rhs1 - self.lhs1

    @property
    def slack2(self) -> float:
        return self.rhs2 - self.lhs2

    @property
    def holds(self) -> bool:
        return self.slack1 >= -1e-9 and self.slack2 >= -1e-9


def prop3_bound_check(rho, rho_tilde, model, epsilon: float | None = None) -> Prop3Report:
    """Evaluate both sides of the predictor stability bounds.

    With ``s`` and ``s~`` the predictors for ``rho`` and ``rho_tilde``::

        ||s~ - s||_1^2 <= 4 (D(rho~||s) - D(rho||s)) + 4 ||rho~ - rho||_1^2 + 12 eps
        ||s~ - rho||_1 <= ||s~ - s||_1 + sqrt(2 eps)

    ``epsilon`` defaults to the achieved ``D(rho||s)``; a smaller value is
    rejected.
    """
    rho = as_density(rho)
    rho_tilde = as_density(rho_tilde)
    fit = qmlp(rho, model)
    if epsilon is None:
        epsilon = fit.value
    if fit.value > epsilon + 1e-12:
        raise ValueError(f"epsilon {epsilon:.3e} is below the achievable value {fit.value:.3e}")
    s = fit.optimizer
    s_t = qmlp(rho_tilde, model).optimizer
    dist = trace_norm(s_t - s)
    lhs1 = dist**2
    rhs1 = 4 * (qre(rho_tilde, s) - qre(rho, s)) + 4 * trace_norm(rho_tilde - rho) ** 2 + 12 * epsilon
    lhs2 = trace_norm(s_t - rho)
    rhs2 = dist + np.sqrt(2 * epsilon)
    return Prop3Report(lhs1, rhs1, lhs2, rhs2, epsilon)
