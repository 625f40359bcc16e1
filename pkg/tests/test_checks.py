import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds, state_from, unitary_from
from qmlp.checks import pinch_class, prop1_check, prop3_bound_check
from qmlp.divergences import kl, qre
from qmlp.linalg import trace_norm
from qmlp.models import ExponentialFamily, FiniteSet, FixedBasisDiagonal, Full, SpectralFloor
from qmlp.states import maximally_mixed, pinch


def _rotated(spectrum, seed):
    u = unitary_from(seed, len(spectrum))
    return (u * np.asarray(spectrum)) @ u.conj().T


def test_pinch_class_verdicts():
    v = unitary_from(0, 2)
    assert pinch_class(Full(2), v) is True
    assert pinch_class(SpectralFloor(2, 0.2), v) is True
    assert pinch_class(FiniteSet((maximally_mixed(2),)), v) is True
    assert pinch_class(FixedBasisDiagonal(v), v) is True
    assert pinch_class(FixedBasisDiagonal(np.eye(2)), v) is False
    assert pinch_class(ExponentialFamily(maximally_mixed(2), (np.diag([1.0, -1.0]),)), v) is None
    assert pinch_class(FiniteSet((np.array([[0.5, 0.2], [0.2, 0.5]]),)), np.eye(2)) is False


def test_pinch_class_basis_permutation_and_phase():
    v = unitary_from(3, 3)
    w = v[:, [2, 0, 1]] * np.exp(1j * np.array([0.3, -1.0, 2.0]))
    assert pinch_class(FixedBasisDiagonal(v), w) is True


def test_pinch_class_dimension_mismatch():
    with pytest.raises(ValueError):
        pinch_class(Full(3), np.eye(2))


def test_pinching_never_lowers_min_eigenvalue():
    # the reason SpectralFloor is closed under pinching
    for seed in range(100):
        sigma = state_from(seed, 3, mix=0.1)
        v = unitary_from(seed + 500, 3)
        assert np.linalg.eigvalsh(pinch(sigma, v))[0] >= np.linalg.eigvalsh(sigma)[0] - 1e-12


def test_prop1_full():
    rep = prop1_check(state_from(1, 3), Full(3))
    assert rep.quantum_value == 0.0 and rep.classical_value == 0.0 and rep.holds


def test_prop1_floor_example():
    rho = _rotated([0.9, 0.1], 47)
    rep = prop1_check(rho, SpectralFloor(2, 0.3))
    assert rep.quantum_value == pytest.approx(0.1163218, abs=1e-7)
    assert rep.classical_value == pytest.approx(0.1163218, abs=1e-7)
    assert rep.holds


@given(seeds, st.integers(2, 3))
def test_prop1_floor_random(seed, d):
    rep = prop1_check(state_from(seed, d), SpectralFloor(d, 0.3 if d == 2 else 0.2))
    assert abs(rep.gap) <= 1e-7


def test_prop1_fixed_basis_own_eigenbasis():
    rho = _rotated([0.6, 0.3, 0.1], 5)
    v = np.linalg.eigh(rho)[1]
    rep = prop1_check(rho, FixedBasisDiagonal(v))
    assert rep.quantum_value == pytest.approx(0.0, abs=1e-9)
    assert rep.holds


def test_prop1_finite_set_pinch_closed():
    rho = np.diag([0.8, 0.2])
    states = (maximally_mixed(2), np.diag([0.7, 0.3]), np.diag([0.3, 0.7]))
    rep = prop1_check(rho, FiniteSet(states))
    assert rep.quantum_value == pytest.approx(kl([0.8, 0.2], [0.7, 0.3]), abs=1e-12)
    assert rep.holds


def test_prop1_rejects_non_closed_class():
    with pytest.raises(ValueError):
        prop1_check(state_from(0, 2), FixedBasisDiagonal(np.eye(2)))


def test_prop1_detects_corrupted_pinch():
    # a pinch in a slightly wrong basis breaks the reduction for finite sets
    def bad_pinch(sigma, basis):
        c, s = np.cos(0.05), np.sin(0.05)
        return pinch(sigma, np.asarray(basis) @ np.array([[c, -s], [s, c]]))

    rho = np.diag([0.8, 0.2])
    with pytest.raises(ValueError):
        prop1_check(rho, FiniteSet((np.diag([0.7, 0.3]),)), pinch_fn=bad_pinch)


def test_prop3_identical_inputs():
    rho = state_from(2, 3)
    rep = prop3_bound_check(rho, rho, SpectralFloor(3, 0.2))
    assert rep.lhs1 == pytest.approx(0.0, abs=1e-12) and rep.holds


def test_prop3_full_class():
    rho, rho_t = state_from(3, 2, mix=0.1), state_from(4, 2, mix=0.1)
    rep = prop3_bound_check(rho, rho_t, Full(2))
    assert rep.epsilon == 0.0
    dist = trace_norm(rho_t - rho)
    assert rep.lhs1 == pytest.approx(dist**2)
    assert rep.rhs1 == pytest.approx(4 * qre(rho_t, rho) + 4 * dist**2)
    assert rep.holds


def test_prop3_sweep():
    worst = np.inf
    for seed in range(100):
        d = 2 + seed % 2
        rho, rho_t = state_from(seed, d), state_from(seed + 1000, d)
        rep = prop3_bound_check(rho, rho_t, SpectralFloor(d, 0.25 if d == 2 else 0.2))
        worst = min(worst, rep.slack1, rep.slack2)
    assert worst >= -1e-9


def test_prop3_rejects_small_epsilon():
    with pytest.raises(ValueError):
        prop3_bound_check(np.diag([0.9, 0.1]), maximally_mixed(2), SpectralFloor(2, 0.3), epsilon=0.01)
