"""Divergences between states and between probability vectors (in nats)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .linalg import (
    EIGENVALUE_FLOOR,
    SupportError,
    as_hermitian,
    eig_hermitian,
    inv_sqrtm,
    op_norm,
    trace_norm,
)
from .states import (
    Povm,
    as_pmf,
    basis_povm,
    measure,
    random_basis_povm,
    support_leq,
)


def von_neumann_entropy(rho) -> float:
    lam = eig_hermitian(rho).eigenvalues
    lam = lam[lam > EIGENVALUE_FLOOR]
    return float(-np.sum(lam * np.log(lam)))


def _support_basis(sigma):
    dec = eig_hermitian(sigma)
    keep = dec.eigenvalues > EIGENVALUE_FLOOR
    return dec.eigenvalues[keep], dec.eigenvectors[:, keep]


def qre(rho, sigma) -> float:
    r"""Quantum relative entropy :math:`D(\rho\|\sigma)=\mathrm{tr}\,\rho(\log\rho-\log\sigma)`.

    Returns ``inf`` when the support of ``rho`` is not contained in the
    support of ``sigma``.  ``log sigma`` is only ever evaluated on the
    support of ``sigma``, so there is no ``0 * log 0`` ambiguity.
    """
    rho = as_hermitian(rho)
    sigma = as_hermitian(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    if not support_leq(rho, sigma):
        return np.inf
    lam_s, v_s = _support_basis(sigma)
    # tr(rho log sigma) through the quadratic forms <s_k|rho|s_k>
    weights = np.einsum("ji,jk,ki->i", v_s.conj(), rho, v_s).real
    cross = float(np.dot(weights, np.log(lam_s)))
    value = -von_neumann_entropy(rho) - cross
    if value < -1e-10:
        raise ArithmeticError(f"negative relative entropy {value:.3e}")
    return max(value, 0.0)


def kl(p, q) -> float:
    """Classical KL divergence with ``0 log 0 = 0`` and ``inf`` off-support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    mask = p > 0
    if np.any(q[mask] <= 0):
        return np.inf
    return max(float(np.sum(p[mask] * np.log(p[mask] / q[mask]))), 0.0)


def variational_objective(h, rho, sigma) -> float:
    r"""Value of :math:`\mathrm{tr}(H\rho) - \log\mathrm{tr}\,e^{H+\log\sigma}`.

    ``sigma`` is compressed to its support before the exponential so the
    kernel contributes nothing, as in the definition.
    """
    h = as_hermitian(h)
    lam_s, v_s = _support_basis(sigma)
    a = v_s.conj().T @ h @ v_s + np.diag(np.log(lam_s))
    return float(np.vdot(h, rho).real) - _log_trace_exp(a)


def _log_trace_exp(a) -> float:
    w = np.linalg.eigvalsh(as_hermitian(a))
    m = w.max()
    return float(m + np.log(np.sum(np.exp(w - m))))


def _softmax_matrix(a) -> np.ndarray:
    """``e^a / tr e^a`` computed stably."""
    dec = eig_hermitian(a)
    w = dec.eigenvalues - dec.eigenvalues.max()
    e = np.exp(w)
    e /= e.sum()
    v = dec.eigenvectors
    return (v * e) @ v.conj().T


def _clip_op_norm(h, budget: float) -> np.ndarray:
    dec = eig_hermitian(h)
    v = dec.eigenvectors
    return (v * np.clip(dec.eigenvalues, -budget, budget)) @ v.conj().T


def qre_variational_lb(
    rho,
    sigma,
    norm_budget: float,
    iters: int = 500,
    h0=None,
    tol: float = 1e-12,
) -> float:
    r"""Lower bound on :math:`D(\rho\|\sigma)` from the variational formula.

    Maximizes :math:`\mathrm{tr}(H\rho)-\log\mathrm{tr}\,e^{H+\log\sigma}`
    over Hermitian ``H`` with operator norm at most ``norm_budget`` by
    accelerated projected gradient ascent (unit step, adaptive restart).
    The objective is concave with a 1-Lipschitz gradient; the iterate
    starts at ``h0`` (zero by default) and the best value seen is
    returned.  Any feasible ``H`` gives a valid lower bound, so the result
    never exceeds the relative entropy beyond rounding.

    The maximum over all ``H`` is attained at ``log rho - log sigma``.
    """
    rho = as_hermitian(rho)
    sigma = as_hermitian(sigma)
    if not support_leq(rho, sigma):
        raise SupportError("variational bound needs spt(rho) inside spt(sigma)")
    if norm_budget < 0:
        raise ValueError("norm_budget must be non-negative")
    lam_s, v_s = _support_basis(sigma)
    # work inside spt(sigma); rho lives there by the support check
    r = v_s.conj().T @ rho @ v_s
    log_s = np.diag(np.log(lam_s)).astype(complex)
    k = lam_s.size

    def value(h):
        return float(np.vdot(h, r).real) - _log_trace_exp(h + log_s)

    h = np.zeros((k, k), dtype=complex) if h0 is None else v_s.conj().T @ as_hermitian(h0) @ v_s
    h = _clip_op_norm(h, norm_budget)
    best = value(h)
    y, h_prev, t = h, h, 1.0
    f_prev = best
    for _ in range(iters):
        grad = r - _softmax_matrix(y + log_s)
        h_new = _clip_op_norm(y + grad, norm_budget)
        f_new = value(h_new)
        if f_new < f_prev:
            # restart momentum from the last accepted point
            y, t = h_prev, 1.0
            grad = r - _softmax_matrix(y + log_s)
            h_new = _clip_op_norm(y + grad, norm_budget)
            f_new = value(h_new)
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        y = h_new + ((t - 1) / t_new) * (h_new - h_prev)
        step = np.linalg.norm(h_new - h_prev)
        h_prev, t, f_prev = h_new, t_new, f_new
        best = max(best, f_new)
        if step < tol:
            break
    return best


def default_povm_family(rho, sigma, n_random: int = 8, seed: int = 0) -> list[Povm]:
    """Eigenbases of ``rho``, ``sigma`` and ``rho - sigma`` plus random bases."""
    rho = as_hermitian(rho)
    sigma = as_hermitian(sigma)
    d = rho.shape[0]
    fam = [
        basis_povm(eig_hermitian(rho)),
        basis_povm(eig_hermitian(sigma)),
        basis_povm(eig_hermitian(rho - sigma)),
    ]
    rng = np.random.default_rng(seed)
    fam.extend(random_basis_povm(d, rng) for _ in range(n_random))
    return fam


def measured_re(rho, sigma, povm_family: Sequence[Povm] | None = None) -> float:
    """Largest classical KL between outcome distributions over a POVM family.

    This is a lower bound on the measured relative entropy (the supremum
    over every finite POVM), which in turn never exceeds :func:`qre`.
    ``None`` selects :func:`default_povm_family`.
    """
    rho = as_hermitian(rho)
    sigma = as_hermitian(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    if povm_family is None:
        povm_family = default_povm_family(rho, sigma)
    return max(kl(measure(rho, m), measure(sigma, m)) for m in povm_family)


def thompson(rho, sigma) -> float:
    r"""Thompson metric :math:`\log\max(\|\sigma^{-1/2}\rho\sigma^{-1/2}\|, \|\rho^{-1/2}\sigma\rho^{-1/2}\|)`.

    Both arguments must be strictly positive definite.
    """
    rho = as_hermitian(rho)
    sigma = as_hermitian(sigma)
    try:
        si = inv_sqrtm(sigma)
        ri = inv_sqrtm(rho)
    except SupportError as exc:
        raise ValueError("Thompson metric needs strictly positive states") from exc
    a = op_norm(si @ rho @ si)
    b = op_norm(ri @ sigma @ ri)
    return max(float(np.log(max(a, b))), 0.0)


def pinsker_gap(rho, sigma) -> float:
    """``2 D(rho||sigma) - ||rho - sigma||_1^2``; non-negative by Pinsker."""
    return 2 * qre(rho, sigma) - trace_norm(np.asarray(rho) - np.asarray(sigma)) ** 2


def kl_pmf(p, q) -> float:
    """:func:`kl` with pmf validation on both arguments."""
    return kl(as_pmf(p), as_pmf(q))
