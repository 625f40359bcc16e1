"""Maximum-likelihood predictors and information projections.

``qmlp`` solves the reverse projection ``min_{sigma in model} D(rho||sigma)``;
``i_projection`` solves the forward projection ``min_{rho in family} D(rho||sigma)``
onto a mixture family, and ``i_projection_hull`` onto the convex hull of
finitely many states.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .divergences import kl, qre
from .linalg import (
    EIGENVALUE_FLOOR,
    NumericalError,
    as_hermitian,
    divided_differences,
    eig_hermitian,
    hs_inner,
    logm,
)
from .models import (
    DEFAULT_PARAMETER_BOX,
    ExponentialFamily,
    FiniteSet,
    FixedBasisDiagonal,
    Full,
    SpectralFloor,
    hermitian_generators,
)
from .states import as_density, as_pmf, maximally_mixed, pinch, spectrum_pmf

KKT_TOL = 1e-9
GRADIENT_ITERS = 10_000
NEWTON_ITERS = 100
ARMIJO_C = 1e-4


@dataclass
class ProjectionResult:
    """Outcome of a projection solve.

    ``status`` is ``"ok"``, ``"boundary"`` (a parameter hit the box),
    ``"infeasible"`` (no candidate has finite divergence; ``value`` is
    ``inf``) or ``"not_converged"``.
    """

    optimizer: np.ndarray
    value: float
    iterations: int = 0
    kkt_residual: float = 0.0
    dual_params: np.ndarray | None = None
    status: str = "ok"
    info: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == "ok"


# classical baseline ----------------------------------------------------------


def floor_projection(p, delta: float) -> np.ndarray:
    """Minimizer of ``kl(p, q)`` over pmfs ``q`` with every entry at least ``delta``.

    KKT: ``q_i = max(delta, c p_i)`` with ``c`` fixed by normalization.
    Coordinates that fall below the floor are clamped and the rest rescaled
    until no new coordinate is clamped.
    """
    p = as_pmf(p)
    k = p.size
    if delta * k > 1 + 1e-12:
        raise ValueError(f"floor {delta} is infeasible for {k} outcomes")
    clamped = np.zeros(k, dtype=bool)
    while True:
        free_mass = p[~clamped].sum()
        rest = 1 - delta * clamped.sum()
        if free_mass <= 0 or rest <= 0:
            q = np.full(k, delta)
            q[~clamped] = max(rest, 0.0) / max((~clamped).sum(), 1)
            break
        q = np.where(clamped, delta, p * rest / free_mass)
        newly = (~clamped) & (q < delta)
        if not newly.any():
            break
        clamped |= newly
    return q / q.sum()


def _floor_kkt_residual(p, q, delta) -> float:
    free = q > delta + 1e-12
    support = p > 0
    ratios = p[free & support] / q[free & support]
    if ratios.size == 0:
        return 0.0
    mu = ratios.mean()
    res = float(np.max(np.abs(ratios - mu))) if ratios.size else 0.0
    at_floor = ~free & support
    if at_floor.any():
        res = max(res, float(np.max(np.clip(p[at_floor] / delta - mu, 0, None))))
    return res


def classical_mlp(p_hat, q_class) -> ProjectionResult:
    """Classical maximum-likelihood predictor ``argmin_{q in class} kl(p_hat, q)``.

    ``q_class`` is ``"full"``, ``("floor", delta)`` or a sequence of pmfs
    (ties resolved to the lowest index).
    """
    p = as_pmf(p_hat)
    if isinstance(q_class, str) and q_class == "full":
        return ProjectionResult(p.copy(), 0.0)
    if isinstance(q_class, tuple) and len(q_class) == 2 and q_class[0] == "floor":
        delta = float(q_class[1])
        q = floor_projection(p, delta)
        return ProjectionResult(q, kl(p, q), kkt_residual=_floor_kkt_residual(p, q, delta))
    candidates = [as_pmf(q) for q in q_class]
    values = [kl(p, q) for q in candidates]
    best = int(np.argmin(values))
    return ProjectionResult(candidates[best].copy(), values[best], iterations=len(values), info={"index": best})


# Gibbs families -------------------------------------------------------------


class _GibbsFamily:
    """``sigma(beta) = exp(K + sum_i beta_i L_i) / Z`` on the support of a base state.

    All operators are compressed to ``spt(base)``; the exponential is the
    zero operator on the kernel.
    """

    def __init__(self, base, operators):
        base = as_hermitian(base)
        dec = eig_hermitian(base)
        keep = dec.eigenvalues > EIGENVALUE_FLOOR
        self.v = dec.eigenvectors[:, keep]
        self.k = np.diag(np.log(dec.eigenvalues[keep])).astype(complex)
        self.ops_full = list(operators)
        self.ops = [self.v.conj().T @ op @ self.v for op in self.ops_full]
        self.dim = base.shape[0]

    def _exponent(self, beta):
        a = self.k.copy()
        for b, op in zip(beta, self.ops):
            a = a + b * op
        return (a + a.conj().T) / 2

    def evaluate(self, beta, hessian: bool = True):
        """Log-partition, gradient (moments) and Hessian at ``beta``."""
        a = self._exponent(beta)
        w, u = np.linalg.eigh(a)
        m = w.max()
        e = np.exp(w - m)
        z = e.sum()
        log_z = m + np.log(z)
        tilde = [u.conj().T @ op @ u for op in self.ops]
        p = e / z
        grad = np.array([float(np.dot(np.diag(t).real, p)) for t in tilde])
        if not hessian:
            return log_z, grad, None
        gamma = divided_differences(w - m, np.exp, np.exp) / z
        n = len(tilde)
        hess = np.empty((n, n))
        for i in range(n):
            ti_gamma = tilde[i] * gamma
            for j in range(i, n):
                val = float(np.sum(tilde[j].T * ti_gamma).real) - grad[i] * grad[j]
                hess[i, j] = hess[j, i] = val
        return log_z, grad, hess

    def state(self, beta) -> np.ndarray:
        a = self._exponent(beta)
        w, u = np.linalg.eigh(a)
        e = np.exp(w - w.max())
        e /= e.sum()
        s = (u * e) @ u.conj().T
        full = self.v @ s @ self.v.conj().T
        return (full + full.conj().T) / 2


def _newton_dual(
    family: _GibbsFamily,
    targets: np.ndarray,
    box: float,
    tol: float = KKT_TOL,
    max_iter: int = NEWTON_ITERS,
):
    """Minimize ``log Z(beta) - beta . targets`` by damped Newton from ``beta = 0``.

    Redundant generators give a singular Hessian; the least-squares step
    handles that.  Returns ``(beta, residual, iterations, status)`` where the
    residual is the largest moment mismatch.
    """
    n = len(family.ops)
    beta = np.zeros(n)
    if n == 0:
        return beta, 0.0, 0, "ok"
    log_z, grad, hess = family.evaluate(beta)
    phi = log_z - beta @ targets
    res = float(np.max(np.abs(grad - targets)))
    steps = 0
    while res > tol:
        if steps == max_iter:
            return beta, res, steps, "not_converged"
        g = grad - targets
        step = -np.linalg.lstsq(hess, g, rcond=1e-12)[0]
        slope = float(g @ step)
        if slope >= 0:  # Hessian too flat to give a descent direction
            step, slope = -g, -float(g @ g)
        t = 1.0
        while True:
            cand = np.clip(beta + t * step, -box, box)
            lz, gr, _ = family.evaluate(cand, hessian=False)
            phi_c = lz - cand @ targets
            if phi_c <= phi + ARMIJO_C * t * slope:
                break
            # near the optimum phi changes below rounding; judge by the moments
            flat = phi_c <= phi + 1e-14 * max(1.0, abs(phi))
            if flat and np.max(np.abs(gr - targets)) < res:
                break
            t *= 0.5
            if t < 1e-12:
                return beta, res, steps, "not_converged"
        beta = cand
        steps += 1
        log_z, grad, hess = family.evaluate(beta)
        phi = log_z - beta @ targets
        res = float(np.max(np.abs(grad - targets)))
        if res > tol and np.any(np.abs(beta) >= box):
            return beta, res, steps, "boundary"
    return beta, res, steps, "ok"


# mixture families and I-projection ------------------------------------------


@dataclass(frozen=True)
class MixtureFamily:
    """States ``rho`` with ``tr(rho L_i) = tr(anchor L_i)`` for every generator.

    Non-Hermitian generators are split into Hermitian pairs on
    construction, which describes the same set with real constraints.
    """

    anchor: np.ndarray
    operators: tuple

    def __post_init__(self):
        anchor = as_density(self.anchor)
        ops = tuple(hermitian_generators(self.operators, anchor.shape[0]))
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.anchor.shape[0]

    @property
    def targets(self) -> np.ndarray:
        return np.array([hs_inner(op, self.anchor).real for op in self.operators])

    def moment_residual(self, rho) -> float:
        if not self.operators:
            return 0.0
        m = np.array([hs_inner(op, rho).real for op in self.operators])
        return float(np.max(np.abs(m - self.targets)))

    def contains(self, rho, tol: float = 1e-8) -> bool:
        return self.moment_residual(rho) <= tol


def off_diagonal_generators(basis) -> list[np.ndarray]:
    """Hermitian generators whose zero moments force diagonality in ``basis``."""
    v = np.asarray(basis, dtype=complex)
    d = v.shape[0]
    ops = []
    for i in range(d):
        for j in range(i + 1, d):
            eij = np.outer(v[:, i], v[:, j].conj())
            ops.append(eij + eij.conj().T)
            ops.append(1j * (eij - eij.conj().T))
    return ops


def diagonal_family(basis, anchor=None) -> MixtureFamily:
    """Mixture family of states diagonal in ``basis``."""
    v = np.asarray(basis, dtype=complex)
    if anchor is None:
        anchor = maximally_mixed(v.shape[0])
    return MixtureFamily(anchor, tuple(off_diagonal_generators(v)))


def i_projection(sigma, family: MixtureFamily, box: float = DEFAULT_PARAMETER_BOX) -> ProjectionResult:
    """Information projection of ``sigma`` onto a mixture family.

    The minimizer of ``D(rho||sigma)`` over the family lies in the Gibbs
    family ``exp(log sigma + sum beta_i L_i)/Z`` (restricted to
    ``spt(sigma)``); ``beta`` is found by damped Newton on the convex dual
    ``log Z(beta) - beta . alpha``.  If the moment targets cannot be met
    by a state supported inside ``spt(sigma)`` the dual is unbounded, the
    parameters run into the box and the result is reported as
    ``"infeasible"`` with infinite value and the family anchor as optimizer.
    """
    sigma = as_density(sigma)
    if sigma.shape != (family.dim, family.dim):
        raise ValueError("state and family dimensions differ")
    if not family.operators:
        return ProjectionResult(sigma.copy(), 0.0, dual_params=np.zeros(0))
    gibbs = _GibbsFamily(sigma, family.operators)
    targets = family.targets
    beta, res, iters, status = _newton_dual(gibbs, targets, box)
    if status == "boundary":
        return ProjectionResult(
            family.anchor.copy(), np.inf, iters, res, beta, "infeasible",
            info={"reason": "moment targets unreachable inside spt(sigma)"},
        )
    if status != "ok":
        raise NumericalError(f"I-projection did not converge (moment residual {res:.3e})")
    rho_star = as_density(gibbs.state(beta))
    return ProjectionResult(rho_star, qre(rho_star, sigma), iters, res, beta, status)


def i_projection_diagonal_closed_form(sigma, basis) -> np.ndarray:
    """``exp(pinch(log sigma)) / Z``: the I-projection of a full-rank ``sigma``
    onto the states diagonal in ``basis``."""
    v = np.asarray(basis, dtype=complex)
    log_s = logm(sigma)
    diag = np.einsum("ji,jk,ki->i", v.conj(), log_s, v).real
    w = np.exp(diag - diag.max())
    w /= w.sum()
    return (v * w) @ v.conj().T


def i_projection_hull(
    sigma,
    states: Sequence,
    tol: float = 1e-11,
    max_iter: int = GRADIENT_ITERS,
) -> ProjectionResult:
    """Information projection of ``sigma`` onto the convex hull of ``states``.

    Pairwise Frank-Wolfe over the mixture weights with an exact line search
    (the objective is convex along every segment).  Stops once the
    Frank-Wolfe duality gap drops below ``tol``; the gap is returned as
    ``kkt_residual``.  Every hull member must be supported inside
    ``spt(sigma)``.
    """
    sigma = as_density(sigma)
    taus = [as_density(t) for t in states]
    if not taus:
        raise ValueError("empty hull")
    m = len(taus)
    log_s = logm(sigma, support_policy="project")
    # start from the uniform mixture, which has the largest support in the hull
    w = np.full(m, 1.0 / m)

    def mix(weights):
        r = sum(wi * t for wi, t in zip(weights, taus))
        return (r + r.conj().T) / 2

    def grad(r):
        g_mat = logm(r, support_policy="project") - log_s
        return np.array([hs_inner(t, g_mat).real for t in taus])

    rho = mix(w)
    if not np.isfinite(qre(rho, sigma)):
        raise ValueError("hull members must be supported inside spt(sigma)")
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(rho)
        active = w > 0
        toward = int(np.argmin(g))
        away = int(np.flatnonzero(active)[np.argmax(g[active])])
        gap = float(w @ g - g[toward])
        if gap <= tol or toward == away:
            break
        direction = taus[toward] - taus[away]
        t_max = w[away]
        t = _line_search(rho, direction, log_s, t_max)
        w[toward] += t
        w[away] -= t
        if w[away] <= 1e-15:
            w[away] = 0.0
        w = w / w.sum()
        rho = mix(w)
    status = "ok" if gap <= max(tol, 1e-9) else "not_converged"
    return ProjectionResult(as_density(rho), qre(rho, sigma), it, gap, w.copy(), status)


def _line_search(rho, direction, log_s, t_max: float) -> float:
    """Exact minimizer of ``D(rho + t*direction || sigma)`` over ``[0, t_max]``.

    The derivative ``tr(direction (log(rho + t dir) - log sigma))`` is
    increasing in ``t``; bisect on its sign.
    """

    def slope(t):
        r = rho + t * direction
        return hs_inner(direction, logm((r + r.conj().T) / 2, support_policy="project") - log_s).real

    if slope(t_max * (1 - 1e-12)) <= 0:
        return t_max
    lo, hi = 0.0, t_max
    for _ in range(80):
        mid = (lo + hi) / 2
        if slope(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15:
            break
    return (lo + hi) / 2


def pythagorean_residual(rho, sigma, family, projection: ProjectionResult | None = None) -> float:
    """``D(rho||sigma) - D(rho||rho*) - D(rho*||sigma)`` for ``rho`` in ``family``.

    ``rho*`` is the I-projection of ``sigma`` onto ``family`` (a
    :class:`MixtureFamily` or a sequence of hull generators).  The residual
    vanishes for mixture families and is non-negative for convex sets.
    """
    if isinstance(family, MixtureFamily):
        if not family.contains(rho):
            raise ValueError(f"rho is outside the family (moment residual {family.moment_residual(rho):.2e})")
        proj = projection or i_projection(sigma, family)
    else:
        proj = projection or i_projection_hull(sigma, family)
    rho_star = proj.optimizer
    return qre(rho, sigma) - qre(rho, rho_star) - qre(rho_star, sigma)


# reverse projection (QMLP) --------------------------------------------------


def qmlp(rho, model, method: str = "auto", init=None) -> ProjectionResult:
    """Quantum maximum-likelihood predictor ``argmin_{sigma in model} D(rho||sigma)``.

    ``method="auto"`` uses the structure of each class:

    * ``Full``: ``sigma* = rho``.
    * ``FixedBasisDiagonal``: the pinching of ``rho`` in the basis.
    * ``SpectralFloor``: the class is unitarily invariant and closed under
      pinching, so the problem reduces to the classical floor problem on the
      spectrum of ``rho``, solved in closed form and rotated back.
    * ``ExponentialFamily``: damped Newton on the convex dual in ``beta``.
    * ``FiniteSet``: enumeration, lowest index on ties.

    ``method="projected_gradient"`` solves ``SpectralFloor`` directly over
    matrices without the spectral reduction (starting from ``init`` or the
    maximally mixed state).
    """
    rho = as_density(rho)
    if rho.shape != (model.dim, model.dim):
        raise ValueError(f"state has dimension {rho.shape[0]}, model has {model.dim}")
    if method == "projected_gradient":
        if not isinstance(model, SpectralFloor):
            raise ValueError("projected_gradient is implemented for SpectralFloor classes")
        return _qmlp_floor_pg(rho, model.delta, init)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")

    if isinstance(model, Full):
        return ProjectionResult(rho.copy(), 0.0)
    if isinstance(model, FixedBasisDiagonal):
        sigma = pinch(rho, model.basis)
        return ProjectionResult(sigma, qre(rho, sigma))
    if isinstance(model, SpectralFloor):
        dec = eig_hermitian(rho)
        lam = spectrum_pmf(rho)
        res = classical_mlp(lam, ("floor", model.delta))
        v = dec.eigenvectors
        sigma = (v * res.optimizer) @ v.conj().T
        sigma = (sigma + sigma.conj().T) / 2
        return ProjectionResult(sigma, res.value, kkt_residual=res.kkt_residual, info={"spectrum": res.optimizer})
    if isinstance(model, ExponentialFamily):
        return _qmlp_exponential(rho, model)
    if isinstance(model, FiniteSet):
        values = [qre(rho, s) for s in model.states]
        best = int(np.argmin(values))
        status = "ok" if np.isfinite(values[best]) else "infeasible"
        return ProjectionResult(model.states[best].copy(), values[best], len(values), status=status, info={"index": best})
    raise TypeError(f"unsupported model class {type(model).__name__}")


def _qmlp_exponential(rho, model: ExponentialFamily) -> ProjectionResult:
    gibbs = _GibbsFamily(model.base, model.operators)
    v = gibbs.v
    outside = rho - v @ (v.conj().T @ rho @ v) @ v.conj().T
    if np.max(np.abs(outside)) > 1e-10:
        first = gibbs.state(np.zeros(len(model.operators)))
        return ProjectionResult(first, np.inf, status="infeasible", info={"reason": "rho not supported in spt(base)"})
    targets = np.array([hs_inner(op, rho).real for op in model.operators])
    beta, res, iters, status = _newton_dual(gibbs, targets, model.box)
    sigma = as_density(gibbs.state(beta))
    if status == "not_converged":
        raise NumericalError(f"exponential-family fit did not converge (moment residual {res:.3e})")
    return ProjectionResult(sigma, qre(rho, sigma), iters, res, beta, status)


def project_floor_spectrum(x, delta: float) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``{y : y_i >= delta, sum(y) = 1}``."""
    x = np.asarray(x, dtype=float)
    lo, hi = x.min() - 1.0, x.max()
    # sum(max(delta, x - tau)) is non-increasing in tau
    for _ in range(200):
        tau = (lo + hi) / 2
        s = np.maximum(delta, x - tau).sum()
        if s > 1:
            lo = tau
        else:
            hi = tau
    y = np.maximum(delta, x - (lo + hi) / 2)
    return y / y.sum()


def _project_floor(a, delta: float) -> np.ndarray:
    dec = eig_hermitian(a)
    y = project_floor_spectrum(dec.eigenvalues, delta)
    v = dec.eigenvectors
    s = (v * y) @ v.conj().T
    return (s + s.conj().T) / 2


def _cross_entropy(rho, sigma) -> tuple[float, np.ndarray]:
    """``-tr(rho log sigma)`` and its gradient in ``sigma`` (full-rank ``sigma``)."""
    dec = eig_hermitian(sigma)
    lam, u = dec.eigenvalues, dec.eigenvectors
    rt = u.conj().T @ rho @ u
    val = -float(np.dot(np.diag(rt).real, np.log(lam)))
    gamma = divided_differences(lam, np.log, np.reciprocal)
    g = -(u @ (rt * gamma) @ u.conj().T)
    return val, (g + g.conj().T) / 2


def _qmlp_floor_pg(rho, delta: float, init=None, tol: float = 1e-13, max_iter: int = GRADIENT_ITERS) -> ProjectionResult:
    """Projected gradient with backtracking over ``{sigma >= delta I, tr sigma = 1}``."""
    d = rho.shape[0]
    sigma = maximally_mixed(d) if init is None else _project_floor(as_hermitian(init), delta)
    f, g = _cross_entropy(rho, sigma)
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        while True:
            cand = _project_floor(sigma - step * g, delta)
            fc, gc = _cross_entropy(rho, cand)
            diff = cand - sigma
            if fc <= f + hs_inner(g, diff).real + np.linalg.norm(diff) ** 2 / (2 * step) + 1e-16:
                break
            step *= 0.5
            if step < 1e-14:
                break
        moved = float(np.linalg.norm(diff))
        sigma, f, g = cand, fc, gc
        step = min(step * 2.0, 1e3)
        if moved < tol:
            break
    # gradient-mapping norm as the stationarity residual
    resid = float(np.linalg.norm(sigma - _project_floor(sigma - g, delta)))
    value = qre(rho, sigma)
    status = "ok" if resid <= 1e-7 else "not_converged"
    return ProjectionResult(sigma, value, it, resid, status=status)
