"""Monte Carlo checks of the finite-sample guarantees.

Every trial draws its sample from a Philox stream keyed by
``(master_seed, n, trial)``, so results do not depend on the number of
worker threads or on completion order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bounds import (
    BoundContext,
    bernstein_tail,
    compute_bound_context,
    hoeffding_mean,
    hoeffding_tail,
    is_matched,
    rhs_conv_rate,
    rhs_experrorqrel,
    tail_qre_err,
    tail_trace_err,
)
from .divergences import kl, qre
from .embedding import (
    FeatureEmbedding,
    covariance_embed,
    empirical_embed,
    inverse_cdf,
    perturbed_empirical,
    reduce_to_span,
    sample_iid,
)
from .linalg import EIGENVALUE_FLOOR, NumericalError, eig_hermitian, op_norm, trace_norm
from .models import Full, SpectralFloor, model_to_json
from .rng import stream
from .solve import classical_mlp, qmlp
from .states import Povm, as_pmf, basis_povm, measure

MAX_FAILED_FRACTION = 0.01
N_SE = 3.0

TRIAL_COLUMNS = ("run_id", "n", "trial", "trace_err_sq", "qre_err", "solver_iters", "kkt_residual")
SUMMARY_COLUMNS = (
    "n",
    "mean_trace_err_sq",
    "rhs_conv_rate",
    "holds_conv_rate",
    "mean_qre_err",
    "rhs_experrorqrel",
    "holds_experrorqrel",
)
TAIL_COLUMNS = ("n", "inequality", "t", "threshold", "exceedance", "rhs", "se", "holds")


class ExperimentError(RuntimeError):
    """Too many trials failed to produce a solution."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo scenario.

    ``pmf`` is the source over the alphabet of ``embedding``.  With
    ``reduce_span`` (default) the embedding is re-expressed on the span of
    the supported feature vectors before anything else, and ``model`` must
    live in that dimension.  ``regime`` may pin the expected branch of the
    bounds (``"eps_zero"`` or ``"eps_positive"``); a mismatch with the
    computed slack is an error.
    """

    pmf: np.ndarray
    embedding: FeatureEmbedding
    model: object
    n_grid: tuple
    trials_per_n: int
    master_seed: int = 0
    tail_thresholds: tuple = ()
    regime: Optional[str] = None
    reduce_span: bool = True
    threads: int = 1

    def __post_init__(self):
        p = as_pmf(self.pmf)
        object.__setattr__(self, "pmf", p)
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be a non-empty strictly increasing list of positive integers")
        object.__setattr__(self, "n_grid", grid)
        if int(self.trials_per_n) < 1:
            raise ValueError("trials_per_n must be at least 1")
        if p.size != self.embedding.alphabet_size:
            raise ValueError("pmf and embedding alphabets differ")
        if self.regime not in (None, "eps_zero", "eps_positive"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if any(t < 0 for t in self.tail_thresholds):
            raise ValueError("tail thresholds must be non-negative")
        if int(self.threads) < 1:
            raise ValueError("threads must be at least 1")
        object.__setattr__(self, "tail_thresholds", tuple(float(t) for t in self.tail_thresholds))
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    def working_embedding(self) -> FeatureEmbedding:
        if not self.reduce_span:
            return self.embedding
        return reduce_to_span(self.embedding, np.flatnonzero(self.pmf > 0))

    def to_json(self) -> dict:
        return {
            "pmf": [float(x) for x in self.pmf],
            "embedding": self.embedding.to_json(),
            "model": model_to_json(self.model),
            "n_grid": list(self.n_grid),
            "trials_per_n": int(self.trials_per_n),
            "master_seed": int(self.master_seed),
            "tail_thresholds": list(self.tail_thresholds),
            "regime": self.regime,
            "reduce_span": self.reduce_span,
        }

    def run_id(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class TrialRecord:
    """Errors of one trial.

    ``fit_star`` and ``fit_hat`` are ``D(rho_n||sigma*_n)`` and
    ``D(rho_n||sigma_hat*_n)``; they enter the hypotheses of the relative
    entropy bounds.
    """

    n: int
    trial: int
    trace_err_sq: float
    qre_err: float
    solver_iters: int
    kkt_residual: float
    fit_star: float = 0.0
    fit_hat: float = 0.0
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class _Setup:
    pmf: np.ndarray
    emb: FeatureEmbedding
    model: object
    rho_p: np.ndarray
    seed: int


def _prepare(cfg: ExperimentConfig) -> tuple[_Setup, Optional[BoundContext]]:
    emb = cfg.working_embedding()
    if cfg.model.dim != emb.dim:
        raise ValueError(f"model dimension {cfg.model.dim} differs from embedding dimension {emb.dim}")
    rho_p = covariance_embed(cfg.pmf, emb)
    ctx = None
    if np.linalg.eigvalsh(rho_p)[0] > EIGENVALUE_FLOOR:
        ctx = compute_bound_context(cfg.pmf, emb, cfg.model, cfg.n_grid[0])
        if cfg.regime is not None and cfg.regime != ctx.regime:
            raise ValueError(f"config declares {cfg.regime} but the model class gives epsilon = {ctx.epsilon:.6g}")
    return _Setup(cfg.pmf, emb, cfg.model, rho_p, int(cfg.master_seed)), ctx


def run_trial(setup: _Setup, n: int, trial: int) -> TrialRecord:
    sample = sample_iid(setup.pmf, n, setup.seed, n, trial)
    rho_n = perturbed_empirical(empirical_embed(sample, setup.emb), n)
    try:
        res = qmlp(rho_n, setup.model)
    except (NumericalError, ArithmeticError, ValueError):
        return _failed(n, trial)
    if res.status not in ("ok", "boundary"):
        return _failed(n, trial, res.iterations)
    sigma = res.optimizer
    sigma_hat = perturbed_empirical(sigma, n)
    return TrialRecord(
        n,
        trial,
        trace_norm(sigma - setup.rho_p) ** 2,
        qre(setup.rho_p, sigma_hat),
        int(res.iterations),
        float(res.kkt_residual),
        float(res.value),
        qre(rho_n, sigma_hat),
    )


def _failed(n, trial, iters=0) -> TrialRecord:
    return TrialRecord(n, trial, np.nan, np.nan, int(iters), np.nan, np.nan, np.nan, "failed")


def run_trials(cfg: ExperimentConfig, setup: _Setup, n: int) -> list[TrialRecord]:
    """All trials at one sample size, in trial order."""
    idx = range(int(cfg.trials_per_n))
    if cfg.threads == 1:
        records = [run_trial(setup, n, k) for k in idx]
    else:
        with ThreadPoolExecutor(max_workers=int(cfg.threads)) as pool:
            records = list(pool.map(lambda k: run_trial(setup, n, k), idx))
    failed = sum(not r.ok for r in records)
    if failed > MAX_FAILED_FRACTION * len(records):
        raise ExperimentError(f"{failed} of {len(records)} trials failed at n = {n}")
    return records


def _ok(records):
    return [r for r in records if r.ok]


def assumption_epsilons(records: Sequence[TrialRecord], epsilon: float) -> tuple[float, float]:
    """Slack values under which the relative entropy hypotheses hold empirically.

    Returns ``(eps_mean, eps_as)``: the smallest values ``>= epsilon`` with
    ``min(E fit_star, E fit_hat) <= eps_mean`` and
    ``min(fit_star, fit_hat) <= eps_as`` on every trial.
    """
    ok = _ok(records)
    if not ok:
        return epsilon, epsilon
    star = np.array([r.fit_star for r in ok])
    hat = np.array([r.fit_hat for r in ok])
    eps_mean = max(epsilon, float(min(star.mean(), hat.mean())))
    eps_as = max(epsilon, float(np.minimum(star, hat).max()))
    if is_matched(eps_mean):
        eps_mean = 0.0
    if is_matched(eps_as):
        eps_as = 0.0
    return eps_mean, eps_as


def loglog_slope(n, y) -> float:
    """Least-squares slope of ``log y`` against ``log n``."""
    x = np.log(np.asarray(n, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, ly, 1)[0])


@dataclass
class RateResult:
    run_id: str
    records: list
    summary: list
    contexts: dict
    epsilon: Optional[float]
    epsilon_assumed: dict
    slope_top_half: float
    slope_all: float
    n_failed: int

    @property
    def holds(self) -> bool:
        return all(row["holds_conv_rate"] is not False and row["holds_experrorqrel"] is not False for row in self.summary)

    def context_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "epsilon": self.epsilon,
            "contexts": [self.contexts[n].to_json() for n in sorted(self.contexts)],
            "epsilon_assumed": {str(n): v for n, v in sorted(self.epsilon_assumed.items())},
            "slope_top_half": self.slope_top_half,
            "slope_all": self.slope_all,
            "n_failed": self.n_failed,
        }


def run_rate_experiment(cfg: ExperimentConfig) -> RateResult:
    """Empirical means of the trace and relative entropy errors against their bounds.

    For each ``n`` the summary row holds the mean ``trace_err_sq`` over
    successful trials with the expectation bound for the exact slack, and
    the mean ``qre_err`` with its bound.  The relative entropy bound is
    evaluated at the slack that makes its hypothesis hold on this run (see
    :func:`assumption_epsilons`).  Holds flags are ``None`` when ``rho_p`` is
    singular and no bound applies.
    """
    setup, ctx0 = _prepare(cfg)
    records, summary, contexts, eps_assumed = [], [], {}, {}
    for n in cfg.n_grid:
        recs = run_trials(cfg, setup, n)
        records.extend(recs)
        ok = _ok(recs)
        mean_tr = float(np.mean([r.trace_err_sq for r in ok]))
        mean_qre = float(np.mean([r.qre_err for r in ok]))
        row = {"n": n, "mean_trace_err_sq": mean_tr, "mean_qre_err": mean_qre}
        if ctx0 is None:
            row.update(rhs_conv_rate=np.nan, holds_conv_rate=None, rhs_experrorqrel=np.nan, holds_experrorqrel=None)
        else:
            ctx = ctx0.at(n)
            contexts[n] = ctx
            eps_mean, _ = assumption_epsilons(recs, ctx.epsilon)
            eps_assumed[n] = eps_mean
            rc = rhs_conv_rate(ctx)
            rq = rhs_experrorqrel(ctx, eps_mean)
            row.update(
                rhs_conv_rate=rc,
                holds_conv_rate=bool(mean_tr <= rc),
                rhs_experrorqrel=rq,
                holds_experrorqrel=bool(mean_qre <= rq),
            )
        summary.append(row)
    ns = [row["n"] for row in summary]
    ys = [row["mean_trace_err_sq"] for row in summary]
    half = max(2, (len(ns) + 1) // 2)
    if len(ns) >= 2 and all(y > 0 for y in ys):
        slope_all = loglog_slope(ns, ys)
        slope_top = loglog_slope(ns[-half:], ys[-half:])
    else:
        slope_all = slope_top = np.nan
    return RateResult(
        cfg.run_id(),
        records,
        summary,
        contexts,
        None if ctx0 is None else ctx0.epsilon,
        eps_assumed,
        slope_top,
        slope_all,
        sum(not r.ok for r in records),
    )


# tails -----------------------------------------------------------------------


def binomial_se(q: float, trials: int) -> float:
    q = min(max(q, 0.0), 1.0)
    return float(np.sqrt(q * (1 - q) / trials))


def _tail_row(n, name, t, threshold, values, rhs):
    values = np.asarray(values, dtype=float)
    freq = float(np.mean(values >= threshold))
    se = binomial_se(rhs, values.size)
    return {
        "n": n,
        "inequality": name,
        "t": t,
        "threshold": float(threshold),
        "exceedance": freq,
        "rhs": float(rhs),
        "se": se,
        "holds": bool(freq <= rhs + N_SE * se),
    }


@dataclass
class TailResult:
    run_id: str
    rows: list
    records: list
    contexts: dict
    epsilon_as: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return all(r["holds"] for r in self.rows)


def run_concentration_experiment(cfg: ExperimentConfig) -> TailResult:
    """Exceedance frequencies of both errors against the tail bounds.

    At each ``n`` and threshold ``t`` the trace error is compared with the
    bound for the exact slack, and the relative entropy error with the
    bound for the almost-sure slack observed on the run.  A row holds when
    the empirical frequency is at most the bound plus three binomial
    standard errors (computed at the bound).
    """
    if not cfg.tail_thresholds:
        raise ValueError("concentration experiment needs tail_thresholds")
    setup, ctx0 = _prepare(cfg)
    if ctx0 is None:
        raise ValueError("tail bounds need rho_p > 0; enable span reduction or fix the embedding")
    rows, records, contexts, eps_as_by_n = [], [], {}, {}
    for n in cfg.n_grid:
        recs = run_trials(cfg, setup, n)
        records.extend(recs)
        ok = _ok(recs)
        ctx = ctx0.at(n)
        contexts[n] = ctx
        _, eps_as = assumption_epsilons(recs, ctx.epsilon)
        eps_as_by_n[n] = eps_as
        tr = [r.trace_err_sq for r in ok]
        qe = [r.qre_err for r in ok]
        for t in cfg.tail_thresholds:
            b = tail_trace_err(ctx, t)
            rows.append(_tail_row(n, b.name, t, b.threshold, tr, b.probability))
            b = tail_qre_err(ctx, t, eps_as)
            rows.append(_tail_row(n, b.name, t, b.threshold, qe, b.probability))
    return TailResult(cfg.run_id(), rows, records, contexts, eps_as_by_n)


# matrix concentration ---------------------------------------------------------


@dataclass(frozen=True)
class FixedMatrices:
    """Fixed Hermitian matrices ``H_1..H_n`` (array of shape ``(n, d, d)``)."""

    matrices: np.ndarray


@dataclass(frozen=True)
class CenteredEmbedding:
    """``H_i = scale (|phi(X_i)><phi(X_i)| - rho_p)`` with ``X_i ~ p`` i.i.d."""

    pmf: np.ndarray
    embedding: FeatureEmbedding
    scale: float = 1.0


@dataclass
class MatrixTailResult:
    kind: str
    n: int
    d: int
    trials: int
    v2: float
    m: float
    rows: list
    mean: Optional[dict] = None

    @property
    def holds(self) -> bool:
        ok = all(r["holds"] for r in self.rows)
        return ok and (self.mean is None or self.mean["holds"])


def _check_bounded(h: np.ndarray, m: Optional[float]) -> float:
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix source is unbounded")
    if h.size and np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2)))) > 1e-12:
        raise ValueError("matrix source must produce Hermitian matrices")
    norms = np.abs(np.linalg.eigvalsh(h)).max(axis=-1) if h.size else np.zeros(0)
    bound = float(norms.max()) if norms.size else 0.0
    if m is not None:
        if bound > m + 1e-12:
            raise ValueError(f"matrix norm {bound:.6g} exceeds the declared bound M = {m}")
        return float(m)
    return bound


def _op_norms(s: np.ndarray) -> np.ndarray:
    return np.abs(np.linalg.eigvalsh(s)).max(axis=-1)


def matrix_concentration_check(
    kind: str,
    matrix_source,
    n: int,
    t_grid: Sequence[float],
    trials: int,
    seed: int,
    m: Optional[float] = None,
    chunk: int = 2000,
) -> MatrixTailResult:
    """Empirical tails of matrix sums against the Hoeffding/Bernstein bounds.

    ``kind="hoeffding"`` needs :class:`FixedMatrices` with ``n`` matrices and
    draws Rademacher signs; the mean of the norm is also compared with its
    bound.  ``kind="bernstein"`` needs :class:`CenteredEmbedding` and draws
    the symbols; ``Vbar^2 = n ||E H^2||`` is computed exactly from the pmf.
    ``m`` is an optional declared norm bound, which every matrix must obey.
    """
    if trials < 1 or n < 1:
        raise ValueError("trials and n must be positive")
    if any(t < 0 for t in t_grid):
        raise ValueError("thresholds must be non-negative")
    rng = stream(seed, kind, n)
    if kind == "hoeffding":
        if not isinstance(matrix_source, FixedMatrices):
            raise TypeError("hoeffding needs FixedMatrices")
        h = np.asarray(matrix_source.matrices, dtype=complex)
        if h.ndim != 3 or h.shape[0] != n:
            raise ValueError(f"expected {n} matrices, got array of shape {h.shape}")
        d = h.shape[1]
        m_val = _check_bounded(h, m)
        v2 = op_norm(np.einsum("nij,njk->ik", h, h))
        flat = h.reshape(n, -1)
        norms = []
        for start in range(0, trials, chunk):
            k = min(chunk, trials - start)
            signs = rng.integers(0, 2, size=(k, n)) * 2.0 - 1.0
            norms.append(_op_norms((signs @ flat).reshape(k, d, d)))
        norms = np.concatenate(norms)
        rows = [_tail_row(n, "concmathoeffding", t, t, norms, hoeffding_tail(d, t, v2)) for t in t_grid]
        bound = hoeffding_mean(d, v2)
        emp = float(norms.mean())
        mean = {"empirical": emp, "bound": bound, "holds": bool(emp <= bound)}
        return MatrixTailResult(kind, n, d, trials, float(v2), m_val, rows, mean)
    if kind == "bernstein":
        if not isinstance(matrix_source, CenteredEmbedding):
            raise TypeError("bernstein needs CenteredEmbedding")
        p = as_pmf(matrix_source.pmf)
        emb = matrix_source.embedding
        rho_p = covariance_embed(p, emb)
        d = rho_p.shape[0]
        proj = np.einsum("xi,xj->xij", emb.vectors, emb.vectors.conj())
        h_x = matrix_source.scale * (proj - rho_p)
        m_val = _check_bounded(h_x[p > 0], m)
        e_h2 = np.einsum("x,xij,xjk->ik", p, h_x, h_x)
        vbar2 = n * op_norm(e_h2)
        flat = h_x.reshape(p.size, -1)
        norms = []
        for start in range(0, trials, chunk):
            k = min(chunk, trials - start)
            sym = inverse_cdf(p, rng.random((k, n)))
            counts = np.stack([np.bincount(row, minlength=p.size) for row in sym]).astype(float)
            norms.append(_op_norms((counts @ flat).reshape(k, d, d)))
        norms = np.concatenate(norms)
        rows = [_tail_row(n, "concmatbernstein", t, t, norms, bernstein_tail(d, t, vbar2, m_val)) for t in t_grid]
        return MatrixTailResult(kind, n, d, trials, float(vbar2), m_val, rows)
    raise ValueError(f"unknown kind {kind!r}; expected 'hoeffding' or 'bernstein'")


# prediction through a measurement ------------------------------------------------


def _measured_class_value(p_hat: np.ndarray, model, povm: Povm) -> float:
    """``min_{sigma in model} kl(p_hat, M(sigma))`` when ``M(model)`` is explicit.

    For a projective measurement, ``M(Full)`` is the whole simplex and
    ``M(SpectralFloor(delta))`` the simplex with every entry at least
    ``delta``; other combinations return ``nan``.
    """
    projective = len(povm) == povm.dim and all(op_norm(e @ e - e) < 1e-10 for e in povm.elements)
    if not projective:
        return float("nan")
    if isinstance(model, Full):
        return classical_mlp(p_hat, "full").value
    if isinstance(model, SpectralFloor):
        return classical_mlp(p_hat, ("floor", model.delta)).value
    return float("nan")


def regret_comparison(cfg: ExperimentConfig, povm: Optional[Povm] = None) -> list[dict]:
    """Classical and quantum routes to a predictor seen through a measurement.

    Per trial, ``rho_hat_n`` is fitted in the model class by QMLP to give
    ``sigma``.  The quantum route reports ``qre = D(rho_hat_n||sigma)`` and
    the measured ``kl(M(rho_hat_n), M(sigma))``; the classical route
    minimizes ``kl(M(rho_hat_n), Q)`` over ``Q`` in the measured class.  The
    ordering ``classical <= measured <= qre`` is checked on every trial.
    ``povm`` defaults to the eigenbasis of ``rho_p``.
    """
    setup, _ = _prepare(cfg)
    if povm is None:
        povm = basis_povm(eig_hermitian(setup.rho_p))
    rows = []
    for n in cfg.n_grid:
        cls, mea, qv, ordered = [], [], [], True
        for k in range(int(cfg.trials_per_n)):
            sample = sample_iid(setup.pmf, n, setup.seed, n, k)
            rho_hat = empirical_embed(sample, setup.emb)
            sigma = qmlp(rho_hat, setup.model).optimizer
            p_hat = measure(rho_hat, povm)
            q_val = qre(rho_hat, sigma)
            m_val = kl(p_hat, measure(sigma, povm))
            c_val = _measured_class_value(p_hat, setup.model, povm)
            ordered &= m_val <= q_val + 1e-9
            if np.isfinite(c_val):
                ordered &= c_val <= m_val + 1e-9
            cls.append(c_val)
            mea.append(m_val)
            qv.append(q_val)
        rows.append(
            {
                "n": n,
                "classical_value": float(np.mean(cls)),
                "quantum_measured": float(np.mean(mea)),
                "quantum_qre": float(np.mean(qv)),
                "ordering_holds": bool(ordered),
            }
        )
    return rows


# output ------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def trials_csv(run_id: str, records: Sequence[TrialRecord]) -> str:
    rows = [
        {
            "run_id": run_id,
            "n": r.n,
            "trial": r.trial,
            "trace_err_sq": r.trace_err_sq,
            "qre_err": r.qre_err,
            "solver_iters": r.solver_iters,
            "kkt_residual": r.kkt_residual,
        }
        for r in records
    ]
    return _csv(TRIAL_COLUMNS, rows)


def summary_csv(summary: Sequence[dict]) -> str:
    return _csv(SUMMARY_COLUMNS, summary)


def tails_csv(rows: Sequence[dict]) -> str:
    return _csv(TAIL_COLUMNS, rows)


def table_csv(rows: Sequence[dict]) -> str:
    """Generic CSV with the keys of the first row as columns."""
    if not rows:
        return ""
    return _csv(tuple(rows[0]), rows)
