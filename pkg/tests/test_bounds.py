import numpy as np
import pytest

from qmlp.bounds import (
    BoundContext,
    bernstein_tail,
    compute_bound_context,
    hoeffding_mean,
    hoeffding_tail,
    rhs_conv_rate,
    rhs_experrorqrel,
    tail_qre_err,
    tail_trace_err,
)
from qmlp.embedding import make_embedding
from qmlp.models import Full, SpectralFloor


def _context(d, n, sigma_inv_norm, t, min_eig=0.5, eps=0.0):
    base = BoundContext(d, 1, eps, 0.0, 0.0, min_eig, t, sigma_inv_norm, np.eye(d) / d, np.eye(d) / d)
    return base.at(n)


def test_b_n_example():
    ctx = _context(2, 100, 10.0, 1.0)
    assert ctx.b_n == pytest.approx(np.log(200), abs=1e-12)
    assert ctx.b_n == pytest.approx(5.2983, abs=1e-4)
    assert ctx.b_bar_n == pytest.approx(np.log(200))
    # the Thompson term wins when it is large
    assert _context(2, 100, 10.0, 7.0).b_n == 7.0


def test_full_class_is_matched():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    ctx = compute_bound_context(p, make_embedding("onehot", 4), Full(4), 50)
    assert ctx.epsilon == 0.0 and ctx.regime == "eps_zero"
    np.testing.assert_allclose(ctx.sigma_star, np.diag(p))
    assert ctx.thompson_T == pytest.approx(0.0, abs=1e-12)
    assert ctx.b_n == pytest.approx(max(np.log(10.0), np.log(200)))


def test_uniform_onehot_min_eig():
    ctx = compute_bound_context(np.full(4, 0.25), make_embedding("onehot", 4), Full(4), 10)
    assert ctx.min_eig_rho_p == pytest.approx(0.25, abs=1e-12)
    assert ctx.rho_p_inv_norm == pytest.approx(4.0)


def test_floor_class_epsilon():
    ctx = compute_bound_context([0.9, 0.1], make_embedding("onehot", 2), SpectralFloor(2, 0.3), 10)
    assert ctx.epsilon == pytest.approx(0.1163218, abs=1e-7)
    assert ctx.regime == "eps_positive"
    assert ctx.sigma_star_inv_norm == pytest.approx(1 / 0.3)


def test_rank_deficient_rho_p_raises():
    emb = make_embedding("explicit", 2, vectors=[[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValueError, match="span"):
        compute_bound_context([0.5, 0.5], emb, Full(2), 10)


def test_matched_rhs_formulas():
    ctx = _context(2, 100, 2.0, 0.0, min_eig=0.5)
    assert rhs_conv_rate(ctx) == pytest.approx((32 * 2 * 2 + 8 * 4) * (8 / 100**2 + 28 * 2 / 100))
    assert rhs_experrorqrel(ctx) == pytest.approx((28 * 4 * 2 + 2 * np.log(2)) / 100)


def test_mismatched_rhs_has_floor_term():
    ctx = _context(2, 10**12, 2.0, 0.0, eps=0.05)
    # the bound tends to 28 eps, slowly (log n / sqrt n)
    assert rhs_conv_rate(ctx) == pytest.approx(28 * 0.05, rel=1e-2)
    assert rhs_experrorqrel(ctx) == pytest.approx(0.05, rel=1e-2)
    assert rhs_experrorqrel(ctx, epsilon=0.0) < 1e-3


def test_tail_bound_names_and_branches():
    m = _context(2, 256, 2.0, 0.0)
    p = _context(2, 256, 2.0, 0.0, eps=0.1)
    assert tail_trace_err(m, 0.1).name == "conc_ineq"
    assert tail_trace_err(p, 0.1).name == "devineqmlpred"
    assert tail_qre_err(m, 0.1).name == "devineqqrelmatched"
    assert tail_qre_err(p, 0.1).name == "devineqqrel"
    assert tail_qre_err(p, 0.1, epsilon=0.0).name == "devineqqrelmatched"
    b = tail_trace_err(p, 0.2)
    assert b.probability == pytest.approx(8 * np.exp(-min(256 * 0.04 / 4, 3 * 256 * 0.2 / 4)))
    with pytest.raises(ValueError):
        tail_trace_err(m, -1.0)


def test_matrix_bound_formulas():
    assert bernstein_tail(2, 1.0, 1.0, 1.0) == pytest.approx(4 * np.exp(-0.25))
    assert bernstein_tail(2, 1.0, 1.0, 1.0) == pytest.approx(3.1152, abs=1e-4)
    assert hoeffding_tail(2, 2.0, 1.0) == pytest.approx(4 * np.exp(-2.0))
    assert hoeffding_tail(3, 0.5, 0.0) == 0.0
    assert hoeffding_mean(2, 4.0) == pytest.approx(2 * (np.sqrt(2 * np.log(4)) + np.sqrt(np.pi / 2)))


def test_context_json_fields():
    ctx = compute_bound_context(np.full(2, 0.5), make_embedding("onehot", 2), Full(2), 8)
    js = ctx.to_json()
    assert set(js) >= {"d", "n", "epsilon", "b_n", "b_bar_n", "min_eig_rho_p", "thompson_T", "sigma_star_inv_norm"}
    assert all(np.isfinite(v) for k, v in js.items() if k != "regime")
