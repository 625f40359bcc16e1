"""Constants and right-hand sides of the finite-sample guarantees for QMLP.

All bounds are stated for a sample of size ``n`` in dimension ``d`` with
``rho_p > 0``.  ``epsilon`` is the approximation slack
``D(rho_p||sigma*_p)`` of the model class; the expectation and tail bounds
have a matched branch (``epsilon == 0``) and a mismatched one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .divergences import thompson
from .embedding import FeatureEmbedding, covariance_embed
from .linalg import EIGENVALUE_FLOOR
from .solve import qmlp

EPS_ZERO_TOL = 1e-12


def hoeffding_mean_factor(d: int) -> float:
    """``sqrt(2 log 2d) + sqrt(pi/2)``."""
    return float(np.sqrt(2 * np.log(2 * d)) + np.sqrt(np.pi / 2))


def is_matched(epsilon: float) -> bool:
    return epsilon <= EPS_ZERO_TOL


@dataclass(frozen=True)
class BoundContext:
    """Problem constants entering the bounds at sample size ``n``.

    ``b_n = max(log ||sigma*^-1||, log(dn), T(rho_p, sigma*))`` and
    ``b_bar_n = max(log(dn), log ||rho_p^-1||)``.
    """

    d: int
    n: int
    epsilon: float
    b_n: float
    b_bar_n: float
    min_eig_rho_p: float
    thompson_T: float
    sigma_star_inv_norm: float
    rho_p: np.ndarray = field(repr=False, compare=False)
    sigma_star: np.ndarray = field(repr=False, compare=False)

    @property
    def rho_p_inv_norm(self) -> float:
        return 1.0 / self.min_eig_rho_p

    @property
    def regime(self) -> str:
        return "eps_zero" if is_matched(self.epsilon) else "eps_positive"

    def at(self, n: int) -> "BoundContext":
        """The same context at another sample size."""
        b_n, b_bar_n = _b_constants(self.d, n, self.sigma_star_inv_norm, self.thompson_T, self.rho_p_inv_norm)
        return BoundContext(
            self.d, n, self.epsilon, b_n, b_bar_n, self.min_eig_rho_p, self.thompson_T,
            self.sigma_star_inv_norm, self.rho_p, self.sigma_star,
        )

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "epsilon": self.epsilon,
            "regime": self.regime,
            "b_n": self.b_n,
            "b_bar_n": self.b_bar_n,
            "min_eig_rho_p": self.min_eig_rho_p,
            "thompson_T": self.thompson_T,
            "sigma_star_inv_norm": self.sigma_star_inv_norm,
        }


def _b_constants(d, n, sigma_inv_norm, t, rho_inv_norm) -> tuple[float, float]:
    log_dn = float(np.log(d * n))
    b_n = max(float(np.log(sigma_inv_norm)), log_dn, t)
    b_bar_n = max(log_dn, float(np.log(rho_inv_norm)))
    return b_n, b_bar_n


def compute_bound_context(p, emb: FeatureEmbedding, model, n: int) -> BoundContext:
    """Bound constants for the source ``p`` embedded by ``emb`` and fitted in ``model``.

    ``epsilon`` is the exact optimal value ``qmlp(rho_p, model).value``
    (values at or below ``1e-12`` are set to zero).

    Raises
    ------
    ValueError
        If ``rho_p`` is singular on the embedding space; reduce the
        embedding to the span of the supported feature vectors first
        (:func:`qmlp.embedding.reduce_to_span`).
    """
    if n < 1:
        raise ValueError("n must be positive")
    rho_p = covariance_embed(p, emb)
    d = rho_p.shape[0]
    if model.dim != d:
        raise ValueError(f"model dimension {model.dim} differs from embedding dimension {d}")
    lam_min = float(np.linalg.eigvalsh(rho_p)[0])
    if lam_min <= EIGENVALUE_FLOOR:
        rank = int(np.sum(np.linalg.eigvalsh(rho_p) > EIGENVALUE_FLOOR))
        raise ValueError(
            f"rho_p has rank {rank} < d = {d}; reduce the embedding to the span of the supported vectors"
        )
    fit = qmlp(rho_p, model)
    sigma = fit.optimizer
    epsilon = float(fit.value)
    if not np.isfinite(epsilon):
        raise ValueError("model class has no state with finite divergence from rho_p")
    if is_matched(epsilon):
        epsilon = 0.0
    s_min = float(np.linalg.eigvalsh(sigma)[0])
    if s_min <= EIGENVALUE_FLOOR:
        raise ValueError("the predictor for rho_p is singular; the bounds need sigma*_p > 0")
    t = thompson(rho_p, sigma)
    b_n, b_bar_n = _b_constants(d, n, 1.0 / s_min, t, 1.0 / lam_min)
    return BoundContext(d, n, epsilon, b_n, b_bar_n, lam_min, t, 1.0 / s_min, rho_p, sigma)


# expectation bounds ---------------------------------------------------------


def rhs_conv_rate(ctx: BoundContext) -> float:
    """Upper bound on ``E ||sigma*_n - rho_p||_1^2``."""
    d, n = ctx.d, ctx.n
    if is_matched(ctx.epsilon):
        return float((32 * d * ctx.rho_p_inv_norm + 8 * d**2) * (8 / n**2 + 28 * d / n))
    return float(
        16 * d * (ctx.b_n + 4) * hoeffding_mean_factor(d) / np.sqrt(n)
        + 16 * ctx.b_n / n
        + 64 / n**2
        + 28 * ctx.epsilon
    )


def rhs_experrorqrel(ctx: BoundContext, epsilon: float | None = None) -> float:
    """Upper bound on ``E D(rho_p || sigma_hat*_n)``.

    ``epsilon`` is the slack in the hypothesis on ``E D(rho_n||sigma*_n)``;
    it defaults to the context's ``epsilon``.
    """
    eps = ctx.epsilon if epsilon is None else epsilon
    d, n = ctx.d, ctx.n
    if is_matched(eps):
        return float((28 * d**2 * ctx.rho_p_inv_norm + 2 * np.log(d)) / n)
    return float((2 * ctx.b_bar_n + np.log(d)) / n + d * ctx.b_bar_n * hoeffding_mean_factor(d) / np.sqrt(n) + eps)


# tail bounds ----------------------------------------------------------------


@dataclass(frozen=True)
class TailBound:
    """``P(statistic >= threshold) <= probability``."""

    name: str
    t: float
    threshold: float
    probability: float


def _bernstein_exponent(n, t):
    return min(n * t**2 / 4, 3 * n * t / 4)


def tail_trace_err(ctx: BoundContext, t: float) -> TailBound:
    """Tail of ``||sigma*_n - rho_p||_1^2`` for the active regime."""
    if t < 0:
        raise ValueError("t must be non-negative")
    d, n = ctx.d, ctx.n
    if is_matched(ctx.epsilon):
        thr = (32 * d * ctx.rho_p_inv_norm + 8 * d**2) * (8 / n**2 + 2 * t)
        prob = 2 * d * np.exp(-min(n * t / 4, 3 * n * np.sqrt(t) / 4))
        return TailBound("conc_ineq", t, float(thr), float(prob))
    thr = 16 * ctx.b_n / n + 64 / n**2 + 28 * ctx.epsilon + 8 * d * (ctx.b_n + 4) * t
    prob = 4 * d * np.exp(-_bernstein_exponent(n, t))
    return TailBound("devineqmlpred", t, float(thr), float(prob))


def tail_qre_err(ctx: BoundContext, t: float, epsilon: float | None = None) -> TailBound:
    """Tail of ``D(rho_p || sigma_hat*_n)``.

    ``epsilon`` is the almost-sure slack of ``D(rho_n||sigma*_n)``; it
    selects the branch and defaults to the context's ``epsilon``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    eps = ctx.epsilon if epsilon is None else epsilon
    d, n = ctx.d, ctx.n
    if is_matched(eps):
        thr = 2 * d * t * ctx.rho_p_inv_norm + 2 * np.log(d) / n
        prob = 2 * d * np.exp(-min(n * t / 4, 3 * n * np.sqrt(t) / 4))
        return TailBound("devineqqrelmatched", t, float(thr), float(prob))
    thr = 2 * ctx.b_bar_n / n + np.log(d) / n + eps + d * ctx.b_bar_n * t
    prob = 2 * d * np.exp(-_bernstein_exponent(n, t))
    return TailBound("devineqqrel", t, float(thr), float(prob))


# matrix concentration -------------------------------------------------------


def hoeffding_tail(d: int, t: float, v2: float) -> float:
    """``2d exp(-t^2 / (2 V^2))`` for Rademacher sums with ``V^2 = ||sum H_i^2||``."""
    if v2 <= 0:
        return 0.0 if t > 0 else float(2 * d)
    return float(2 * d * np.exp(-(t**2) / (2 * v2)))


def hoeffding_mean(d: int, v2: float) -> float:
    """``(sqrt(2 log 2d) + sqrt(pi/2)) V``."""
    return hoeffding_mean_factor(d) * float(np.sqrt(max(v2, 0.0)))


def bernstein_tail(d: int, t: float, vbar2: float, m: float) -> float:
    """``2d exp(-min(t^2 / (4 Vbar^2), 3t / (4M)))`` for zero-mean sums."""
    if vbar2 <= 0 or m <= 0:
        return 0.0 if t > 0 else float(2 * d)
    return float(2 * d * np.exp(-min(t**2 / (4 * vbar2), 3 * t / (4 * m))))
