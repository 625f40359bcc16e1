import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds, state_from, unitary_from
from qmlp.linalg import eig_hermitian, random_unitary
from qmlp.states import (
    Povm,
    ProbabilityVector,
    as_density,
    as_pmf,
    basis_povm,
    computational_povm,
    is_density,
    maximally_mixed,
    measure,
    pinch,
    pure_state,
    random_spectrum_state,
    spectrum_pmf,
    support_leq,
)

SIGMA = np.array([[0.7, 0.1], [0.1, 0.3]])


def test_as_density_clips_dust():
    rho = np.diag([1.0 + 1e-13, -1e-13])
    out = as_density(rho)
    assert np.all(np.linalg.eigvalsh(out) >= 0)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-15)


def test_as_density_rejects():
    with pytest.raises(ValueError):
        as_density(np.diag([0.6, 0.6]))
    with pytest.raises(ValueError):
        as_density(np.diag([1.1, -0.1]))
    with pytest.raises(ValueError):
        as_density(np.diag([0.5 + 2e-10, 0.5 + 2e-10, -4e-10]) + 0)
    assert not is_density([[1, 1], [0, 0]])


def test_maximally_mixed():
    assert np.allclose(maximally_mixed(2), np.diag([0.5, 0.5]))
    assert np.allclose(maximally_mixed(4), np.eye(4) / 4)
    assert np.trace(maximally_mixed(3)).real == 1.0
    with pytest.raises(ValueError):
        maximally_mixed(0)


def test_pinch_examples():
    assert np.allclose(pinch(SIGMA, np.eye(2)), np.diag([0.7, 0.3]))
    diag = np.diag([0.2, 0.8])
    assert np.allclose(pinch(diag, np.eye(2)), diag)


def test_pinch_quadratic_forms_seed13():
    g = np.random.default_rng(13)
    sigma = state_from(13, 3)
    v = random_unitary(3, g)
    out = v.conj().T @ pinch(sigma, v) @ v
    expected = [np.vdot(v[:, i], sigma @ v[:, i]).real for i in range(3)]
    assert np.allclose(np.diag(out), expected, atol=1e-14)
    assert np.allclose(out - np.diag(np.diag(out)), 0, atol=1e-14)


def test_pinch_accepts_decomposition_and_rejects_bad_basis():
    dec = eig_hermitian(SIGMA)
    assert np.allclose(pinch(SIGMA, dec), SIGMA)
    with pytest.raises(ValueError):
        pinch(SIGMA, np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        pinch(np.eye(3) / 3, np.eye(2))


@given(seeds, st.integers(1, 4))
def test_pinch_properties(seed, d):
    sigma = state_from(seed, d)
    v = unitary_from(seed + 1, d)
    out = pinch(sigma, v)
    assert is_density(out)
    assert np.allclose(pinch(out, v), out, atol=1e-12)
    assert np.linalg.eigvalsh(out)[0] >= np.linalg.eigvalsh(sigma)[0] - 1e-10
    # commutes with operators diagonal in the basis
    x = (v * np.arange(1, d + 1)) @ v.conj().T
    assert np.allclose(out @ x, x @ out, atol=1e-12)


def test_measure_examples():
    assert np.allclose(measure(maximally_mixed(2), computational_povm(2)), [0.5, 0.5])
    assert np.allclose(measure(np.diag([1.0, 0.0]), computational_povm(2)), [1, 0])


def _three_outcome_povm(rng):
    # trine-like POVM from a random isometry C^2 -> C^3
    u = random_unitary(3, rng)[:, :2]
    return Povm(tuple(np.outer(u[k].conj(), u[k]) for k in range(3)))


def test_measure_trace_oracle_seed17():
    g = np.random.default_rng(17)
    rho = state_from(17, 2)
    povm = _three_outcome_povm(g)
    p = measure(rho, povm)
    assert np.allclose(p, [np.trace(m @ rho).real for m in povm.elements], atol=1e-14)
    assert p.sum() == pytest.approx(1.0, abs=1e-10)


def test_measure_phase_invariant():
    rng = np.random.default_rng(1)
    v = random_unitary(3, rng)
    rho = state_from(1, 3)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    assert np.allclose(measure(rho, basis_povm(v)), measure(rho, basis_povm(v * phases)), atol=1e-14)


def test_povm_validation():
    with pytest.raises(ValueError):
        Povm((np.diag([1.0, 0.0]),))
    with pytest.raises(ValueError):
        Povm((np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])))
    with pytest.raises(ValueError):
        Povm(())
    with pytest.raises(ValueError):
        Povm((np.eye(2),), labels=("a", "b"))
    assert computational_povm(3).labels == (0, 1, 2)


def test_spectrum_pmf_examples():
    assert np.allclose(spectrum_pmf(maximally_mixed(3)), [1 / 3] * 3)
    assert np.allclose(spectrum_pmf(pure_state([1, 1j, 0])), [1, 0, 0])
    lam = spectrum_pmf(SIGMA)
    assert np.allclose(lam, [(1 + np.sqrt(0.2)) / 2, (1 - np.sqrt(0.2)) / 2], atol=1e-14)
    assert lam == pytest.approx([0.7236068, 0.2763932], abs=1e-7)


@given(seeds, st.integers(1, 5))
def test_spectrum_pmf_is_sorted_pmf(seed, d):
    lam = spectrum_pmf(state_from(seed, d))
    ProbabilityVector(lam)
    assert np.all(np.diff(lam) <= 0)


def test_support_leq_examples():
    assert support_leq(SIGMA, SIGMA)
    assert not support_leq(maximally_mixed(2), np.diag([1.0, 0.0]))
    assert support_leq(np.diag([1.0, 0.0]), maximally_mixed(2))
    assert support_leq(pure_state([1, 1]), pure_state([2, 2]))


def test_probability_vector_and_as_pmf():
    pv = ProbabilityVector([0.5, 0.5, 0.0])
    assert list(pv.support) == [0, 1]
    assert len(pv) == 3
    assert np.array_equal(as_pmf(pv), pv.weights)
    with pytest.raises(ValueError):
        ProbabilityVector([0.5, 0.6])
    with pytest.raises(ValueError):
        as_pmf([1.2, -0.2])


def test_random_spectrum_state():
    rho = random_spectrum_state([0.9, 0.1], np.random.default_rng(0))
    assert np.allclose(spectrum_pmf(rho), [0.9, 0.1])
