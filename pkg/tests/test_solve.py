import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm as sp_expm
from scipy.linalg import logm as sp_logm

from conftest import seeds, state_from, unitary_from
from qmlp.divergences import kl, qre
from qmlp.linalg import op_norm
from qmlp.models import (
    ExponentialFamily,
    FiniteSet,
    FixedBasisDiagonal,
    Full,
    SpectralFloor,
    model_from_json,
    model_to_json,
)
from qmlp.solve import (
    MixtureFamily,
    classical_mlp,
    diagonal_family,
    floor_projection,
    i_projection,
    i_projection_diagonal_closed_form,
    i_projection_hull,
    project_floor_spectrum,
    pythagorean_residual,
    qmlp,
)
from qmlp.states import maximally_mixed, pinch

Z = np.diag([1.0, -1.0])
FLOOR_VALUE = 0.1163218


def _grid_floor_oracle(p, delta, step=1e-6):
    # two outcomes: q = (x, 1 - x) with delta <= x <= 1 - delta
    x = np.arange(delta, 1 - delta + step / 2, step)
    vals = p[0] * np.log(p[0] / x) + p[1] * np.log(p[1] / (1 - x))
    i = int(np.argmin(vals))
    return x[i], vals[i]


def _closed_form_oracle(sigma, v):
    # exp(pinch(log sigma)) / Z with scipy's matrix functions
    log_s = v.conj().T @ sp_logm(sigma) @ v
    m = sp_expm(np.diag(np.diag(log_s)))
    m = v @ m @ v.conj().T
    return m / np.trace(m)


# classical baseline ------------------------------------------------------------


def test_classical_full_and_finite_set():
    p = np.array([0.2, 0.5, 0.3])
    res = classical_mlp(p, "full")
    np.testing.assert_allclose(res.optimizer, p)
    assert res.value == 0.0
    res = classical_mlp(p, [p, np.full(3, 1 / 3)])
    assert res.value == 0.0 and res.info["index"] == 0


def test_classical_finite_set_lowest_index_tie():
    res = classical_mlp([0.5, 0.5], [[0.4, 0.6], [0.6, 0.4]])
    assert res.info["index"] == 0


def test_classical_floor_example():
    res = classical_mlp([0.9, 0.1], ("floor", 0.3))
    np.testing.assert_allclose(res.optimizer, [0.7, 0.3], atol=1e-12)
    x, v = _grid_floor_oracle(np.array([0.9, 0.1]), 0.3)
    assert x == pytest.approx(0.7, abs=1e-6)
    assert res.value == pytest.approx(v, abs=1e-9)
    assert res.value == pytest.approx(FLOOR_VALUE, abs=1e-7)
    assert res.kkt_residual <= 1e-9


def test_classical_floor_infeasible():
    with pytest.raises(ValueError):
        classical_mlp([0.5, 0.5], ("floor", 0.6))


@given(seeds, st.integers(2, 6), st.floats(0.05, 1.0))
def test_floor_projection_kkt(seed, k, frac):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.full(k, 0.5))
    delta = frac / k
    q = floor_projection(p, delta)
    assert q.sum() == pytest.approx(1.0, abs=1e-12)
    assert q.min() >= delta - 1e-12
    # free coordinates share a common ratio p/q that dominates every clamped one
    free = q > delta + 1e-12
    if free.any():
        c = (p[free] / q[free]).mean()
        np.testing.assert_allclose(p[free] / q[free], c, rtol=1e-9)
        assert np.all(p[~free] / delta <= c + 1e-9)
    # no random feasible point does better
    for _ in range(20):
        r = delta + (1 - k * delta) * rng.dirichlet(np.ones(k))
        assert kl(p, q) <= kl(p, r) + 1e-12


def test_project_floor_spectrum_is_euclidean_projection():
    x = np.array([0.9, 0.15, -0.05])
    y = project_floor_spectrum(x, 0.1)
    assert y.sum() == pytest.approx(1.0) and y.min() >= 0.1 - 1e-12
    rng = np.random.default_rng(3)
    for _ in range(200):
        r = 0.1 + 0.7 * rng.dirichlet(np.ones(3))
        assert np.linalg.norm(x - y) <= np.linalg.norm(x - r) + 1e-12


# qmlp ------------------------------------------------------------------------------


@given(seeds, st.integers(1, 4))
def test_qmlp_full_returns_input(seed, d):
    rho = state_from(seed, d)
    res = qmlp(rho, Full(d))
    np.testing.assert_allclose(res.optimizer, rho)
    assert res.value == 0.0


def test_qmlp_fixed_basis_example():
    rho = np.array([[0.7, 0.1], [0.1, 0.3]])
    res = qmlp(rho, FixedBasisDiagonal(np.eye(2)))
    np.testing.assert_allclose(res.optimizer, np.diag([0.7, 0.3]), atol=1e-12)
    assert res.value == pytest.approx(qre(rho, np.diag([0.7, 0.3])), abs=1e-12)
    # grid search over the diagonal simplex at 1e-3 resolution
    grid = np.arange(1e-3, 1.0, 1e-3)
    vals = [qre(rho, np.diag([x, 1 - x])) for x in grid]
    assert grid[int(np.argmin(vals))] == pytest.approx(0.7, abs=1e-3)
    assert res.value <= min(vals) + 1e-12


def test_qmlp_spectral_floor_example():
    res = qmlp(np.diag([0.9, 0.1]), SpectralFloor(2, 0.3))
    np.testing.assert_allclose(res.optimizer, np.diag([0.7, 0.3]), atol=1e-12)
    assert res.value == pytest.approx(FLOOR_VALUE, abs=1e-7)


@given(seeds, st.integers(2, 4))
def test_qmlp_spectral_floor_commutes_and_is_basis_free(seed, d):
    rho = state_from(seed, d)
    model = SpectralFloor(d, 0.5 / d)
    res = qmlp(rho, model)
    assert op_norm(res.optimizer @ rho - rho @ res.optimizer) <= 1e-8
    assert model.contains(res.optimizer)
    assert res.value == pytest.approx(qre(rho, res.optimizer), abs=1e-9)
    u = unitary_from(seed + 1, d)
    rotated = qmlp(u @ rho @ u.conj().T, model)
    assert rotated.value == pytest.approx(res.value, abs=1e-9)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_projected_gradient_agrees_with_reduction(seed):
    d = 3
    rho = state_from(seed, d)
    model = SpectralFloor(d, 0.2)
    spectral = qmlp(rho, model)
    pg = qmlp(rho, model, method="projected_gradient")
    assert pg.value == pytest.approx(spectral.value, abs=1e-7)
    # convexity: a different start lands on the same value
    pg2 = qmlp(rho, model, method="projected_gradient", init=state_from(seed + 50, d))
    assert pg2.value == pytest.approx(pg.value, abs=1e-7)


def test_qmlp_exponential_family_example():
    model = ExponentialFamily(maximally_mixed(2), (Z,))
    rho = np.diag([0.75, 0.25])
    res = qmlp(rho, model)
    # bisection oracle on tanh(beta) = 0.5
    lo, hi = 0.0, 5.0
    for _ in range(100):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if np.tanh(mid) < 0.5 else (lo, mid)
    assert res.dual_params[0] == pytest.approx(lo, abs=1e-8)
    assert np.trace(res.optimizer @ Z).real == pytest.approx(0.5, abs=1e-9)
    assert res.value == pytest.approx(0.0, abs=1e-9)


def test_qmlp_exponential_family_box_is_reported():
    model = ExponentialFamily(maximally_mixed(2), (Z,), box=1.0)
    res = qmlp(np.diag([0.99, 0.01]), model)
    assert res.status == "boundary"
    assert abs(res.dual_params[0]) == pytest.approx(1.0)


def test_qmlp_exponential_family_outside_support():
    model = ExponentialFamily(np.diag([1.0, 0.0]), (Z,))
    res = qmlp(maximally_mixed(2), model)
    assert res.status == "infeasible" and res.value == np.inf


def test_qmlp_finite_set_enumerates():
    rho = state_from(4, 3)
    states = [state_from(s, 3, mix=0.1) for s in (5, 6, 7)]
    res = qmlp(rho, FiniteSet(tuple(states)))
    vals = [qre(rho, s) for s in states]
    assert res.info["index"] == int(np.argmin(vals))
    assert res.value == pytest.approx(min(vals))
    tie = qmlp(maximally_mixed(2), FiniteSet((np.diag([0.4, 0.6]), np.diag([0.6, 0.4]))))
    assert tie.info["index"] == 0


@given(seeds, st.integers(2, 3))
def test_qmlp_value_zero_iff_member(seed, d):
    rho = state_from(seed, d, mix=0.3)
    floor = SpectralFloor(d, 0.05)
    assert (qmlp(rho, floor).value <= 1e-9) == floor.contains(rho)
    assert qmlp(rho, FiniteSet((rho,))).value == pytest.approx(0.0, abs=1e-9)
    diag = FixedBasisDiagonal(np.eye(d))
    assert (qmlp(rho, diag).value <= 1e-9) == diag.contains(rho, tol=1e-6)


def test_qmlp_dimension_mismatch():
    with pytest.raises(ValueError):
        qmlp(maximally_mixed(2), Full(3))
    with pytest.raises(ValueError):
        qmlp(maximally_mixed(2), Full(2), method="projected_gradient")


# I-projection ----------------------------------------------------------------


def test_i_projection_without_constraints():
    sigma = state_from(1, 3)
    res = i_projection(sigma, MixtureFamily(maximally_mixed(3), ()))
    np.testing.assert_allclose(res.optimizer, sigma)
    assert res.value == 0.0


def test_i_projection_single_constraint_example():
    family = MixtureFamily(np.diag([0.7, 0.3]), (Z,))
    res = i_projection(maximally_mixed(2), family)
    np.testing.assert_allclose(res.optimizer, np.diag([0.7, 0.3]), atol=1e-9)
    assert res.kkt_residual <= 1e-9


@given(seeds, st.integers(2, 4))
def test_i_projection_diagonal_family_closed_form(seed, d):
    sigma = state_from(seed, d, mix=0.05)
    v = unitary_from(seed + 3, d)
    res = i_projection(sigma, diagonal_family(v))
    np.testing.assert_allclose(res.optimizer, _closed_form_oracle(sigma, v), atol=1e-8)
    np.testing.assert_allclose(i_projection_diagonal_closed_form(sigma, v), res.optimizer, atol=1e-8)
    assert diagonal_family(v).moment_residual(res.optimizer) <= 1e-9
    # full-support family: the projection is full rank
    assert np.linalg.eigvalsh(res.optimizer)[0] > 0
    assert res.value == pytest.approx(qre(res.optimizer, sigma), abs=1e-9)


def test_i_projection_diagonal_is_not_the_pinching():
    sigma = np.array([[0.7, 0.1], [0.1, 0.3]])
    res = i_projection(sigma, diagonal_family(np.eye(2)))
    # the minimizer over diagonal states is exp(diag log sigma)/Z
    assert np.linalg.norm(res.optimizer - pinch(sigma, np.eye(2))) > 1e-3
    assert res.value < qre(pinch(sigma, np.eye(2)), sigma)


def test_i_projection_infeasible_support():
    sigma = np.diag([1.0, 0.0])
    res = i_projection(sigma, MixtureFamily(maximally_mixed(2), (Z,)))
    assert res.status == "infeasible" and res.value == np.inf
    np.testing.assert_allclose(res.optimizer, maximally_mixed(2))


def test_non_hermitian_generators_are_split():
    e01 = np.array([[0.0, 1.0], [0.0, 0.0]])
    family = MixtureFamily(maximally_mixed(2), (e01,))
    assert len(family.operators) == 2
    assert all(np.allclose(op, op.conj().T) for op in family.operators)


# Pythagorean identity ----------------------------------------------------------


def test_pythagorean_example():
    rho = np.diag([0.6, 0.4])
    sigma = np.array([[0.7, 0.1], [0.1, 0.3]])
    family = diagonal_family(np.eye(2))
    assert abs(pythagorean_residual(rho, sigma, family)) <= 1e-9
    star = i_projection(sigma, family).optimizer
    assert pythagorean_residual(star, sigma, family) == pytest.approx(0.0, abs=1e-9)


def test_pythagorean_sweep():
    worst = 0.0
    for seed in range(100):
        d = 2 + seed % 2
        rng = np.random.default_rng(seed)
        v = unitary_from(seed + 1000, d)
        rho = (v * rng.dirichlet(np.ones(d))) @ v.conj().T
        sigma = state_from(seed, d, mix=0.05)
        worst = max(worst, abs(pythagorean_residual(rho, sigma, diagonal_family(v))))
    assert worst <= 1e-7


def test_pythagorean_rejects_outside_family():
    with pytest.raises(ValueError):
        pythagorean_residual(np.array([[0.5, 0.2], [0.2, 0.5]]), maximally_mixed(2), diagonal_family(np.eye(2)))


@pytest.mark.parametrize("seed", range(5))
def test_hull_projection_inequality(seed):
    d = 3
    states = [state_from(seed * 10 + k, d, mix=0.2) for k in range(3)]
    sigma = state_from(seed + 99, d, mix=0.05)
    proj = i_projection_hull(sigma, states)
    assert proj.status == "ok"
    rng = np.random.default_rng(seed)
    for _ in range(5):
        w = rng.dirichlet(np.ones(3))
        rho = sum(wi * s for wi, s in zip(w, states))
        assert pythagorean_residual(rho, sigma, states, proj) >= -1e-7
        assert qre(rho, sigma) >= proj.value - 1e-9


# serialization ------------------------------------------------------------------


@pytest.mark.parametrize(
    "model",
    [
        Full(3),
        SpectralFloor(2, 0.25),
        FixedBasisDiagonal(unitary_from(2, 3)),
        ExponentialFamily(maximally_mixed(2), (Z,), box=10.0),
        FiniteSet((maximally_mixed(2), np.diag([0.9, 0.1]))),
    ],
)
def test_model_json_round_trip(model):
    back = model_from_json(model_to_json(model))
    assert type(back) is type(model) and back.dim == model.dim
    rho = state_from(8, model.dim)
    assert qmlp(rho, back).value == pytest.approx(qmlp(rho, model).value, abs=1e-12)


@pytest.mark.parametrize(
    "data",
    [
        {"variant": "spectral_floor", "dim": 2, "delta": 0.6},
        {"variant": "spectral_floor", "dim": 2},
        {"variant": "bogus"},
        {"variant": "fixed_basis_diagonal", "basis": {"dim": 2, "vectors": [[[1, 0], [0, 0]], [[1, 0], [0, 0]]]}},
    ],
)
def test_model_json_validation(data):
    with pytest.raises(ValueError):
        model_from_json(data)


def test_model_invariants():
    with pytest.raises(ValueError):
        SpectralFloor(3, 0.4)
    with pytest.raises(ValueError):
        SpectralFloor(3, 0.0)
    with pytest.raises(ValueError):
        FiniteSet(())
    with pytest.raises(ValueError):
        ExponentialFamily(maximally_mixed(2), (np.eye(3),))
