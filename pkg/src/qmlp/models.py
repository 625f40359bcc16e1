"""Model classes: the sets of candidate predictor states.

Five variants are supported, each a frozen dataclass with a ``dim``
attribute and a JSON round trip through :func:`model_to_json` /
:func:`model_from_json`:

* :class:`Full` -- every density operator.
* :class:`SpectralFloor` -- states whose eigenvalues are all at least ``delta``.
* :class:`FixedBasisDiagonal` -- states diagonal in a fixed orthonormal basis.
* :class:`ExponentialFamily` -- Gibbs states ``exp(log s0 + sum b_i L_i) / Z``.
* :class:`FiniteSet` -- an explicit finite list of states.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .io import matrix_from_json, matrix_to_json, vectors_from_json, vectors_to_json
from .linalg import as_hermitian
from .states import as_density, check_orthonormal

DEFAULT_PARAMETER_BOX = 50.0


@dataclass(frozen=True)
class Full:
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")

    def contains(self, sigma, tol: float = 1e-9) -> bool:
        return _is_state(sigma, self.dim)


@dataclass(frozen=True)
class SpectralFloor:
    dim: int
    delta: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not 0 < self.delta <= 1 / self.dim:
            raise ValueError(
                f"spectral floor needs 0 < delta <= 1/d = {1 / self.dim:.6g}, got {self.delta}"
            )

    def contains(self, sigma, tol: float = 1e-9) -> bool:
        return _is_state(sigma, self.dim) and np.linalg.eigvalsh(sigma)[0] >= self.delta - tol


@dataclass(frozen=True)
class FixedBasisDiagonal:
    """States diagonal in the orthonormal basis given by the columns of ``basis``."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        check_orthonormal(b)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def contains(self, sigma, tol: float = 1e-9) -> bool:
        if not _is_state(sigma, self.dim):
            return False
        m = self.basis.conj().T @ sigma @ self.basis
        return float(np.max(np.abs(m - np.diag(np.diag(m))))) <= tol


@dataclass(frozen=True)
class ExponentialFamily:
    """Gibbs family over a base state ``base`` generated by Hermitian ``operators``.

    Non-Hermitian generators are replaced by the pair ``(L + L^dag)/2`` and
    ``i(L - L^dag)/2``, which generate the same real-parameter family.
    ``box`` bounds every parameter in absolute value.
    """

    base: np.ndarray
    operators: tuple
    box: float = DEFAULT_PARAMETER_BOX

    def __post_init__(self):
        base = as_hermitian(self.base)
        if np.linalg.eigvalsh(base)[0] < -1e-10 or np.trace(base).real > 1 + 1e-10:
            raise ValueError("base must be a sub-density operator")
        ops = tuple(hermitian_generators(self.operators, base.shape[0]))
        if self.box <= 0:
            raise ValueError("parameter box must be positive")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.base.shape[0]


@dataclass(frozen=True)
class FiniteSet:
    states: tuple = field(default=())

    def __post_init__(self):
        if len(self.states) == 0:
            raise ValueError("finite model class needs at least one state")
        states = tuple(as_density(s) for s in self.states)
        d = states[0].shape[0]
        if any(s.shape != (d, d) for s in states):
            raise ValueError("states have inconsistent dimensions")
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    def contains(self, sigma, tol: float = 1e-10) -> bool:
        return any(np.max(np.abs(sigma - s)) <= tol for s in self.states)


ModelClass = Union[Full, SpectralFloor, FixedBasisDiagonal, ExponentialFamily, FiniteSet]


def hermitian_generators(operators, d: int) -> list[np.ndarray]:
    out = []
    for op in operators:
        a = np.asarray(op, dtype=complex)
        if a.shape != (d, d):
            raise ValueError(f"operator shape {a.shape} does not match dimension {d}")
        if not np.all(np.isfinite(a)):
            raise ValueError("operators must be bounded")
        out.append((a + a.conj().T) / 2)
        if not np.allclose(a, a.conj().T, atol=1e-12):
            out.append(1j * (a - a.conj().T) / 2)
    return out


def _is_state(sigma, d: int) -> bool:
    sigma = np.asarray(sigma)
    if sigma.shape != (d, d):
        return False
    try:
        as_density(sigma)
    except ValueError:
        return False
    return True


def model_to_json(model: ModelClass) -> dict:
    if isinstance(model, Full):
        return {"variant": "full", "dim": model.dim}
    if isinstance(model, SpectralFloor):
        return {"variant": "spectral_floor", "dim": model.dim, "delta": model.delta}
    if isinstance(model, FixedBasisDiagonal):
        return {"variant": "fixed_basis_diagonal", "basis": vectors_to_json(model.basis)}
    if isinstance(model, ExponentialFamily):
        return {
            "variant": "exponential_family",
            "base": matrix_to_json(model.base),
            "operators": [matrix_to_json(op) for op in model.operators],
            "box": model.box,
        }
    if isinstance(model, FiniteSet):
        return {"variant": "finite_set", "states": [matrix_to_json(s) for s in model.states]}
    raise TypeError(f"not a model class: {model!r}")


def model_from_json(data: dict) -> ModelClass:
    """Build a model class from its JSON description.

    Raises ``ValueError`` on unknown variants, missing fields or parameters
    that violate the class invariants.
    """
    try:
        variant = data["variant"]
        if variant == "full":
            return Full(int(data["dim"]))
        if variant == "spectral_floor":
            return SpectralFloor(int(data["dim"]), float(data["delta"]))
        if variant == "fixed_basis_diagonal":
            basis = data["basis"]
            if basis == "computational":
                return FixedBasisDiagonal(np.eye(int(data["dim"]), dtype=complex))
            return FixedBasisDiagonal(vectors_from_json(basis))
        if variant == "exponential_family":
            return ExponentialFamily(
                matrix_from_json(data["base"]),
                tuple(matrix_from_json(op, hermitian=False) for op in data["operators"]),
                float(data.get("box", DEFAULT_PARAMETER_BOX)),
            )
        if variant == "finite_set":
            return FiniteSet(tuple(matrix_from_json(s) for s in data["states"]))
    except KeyError as exc:
        raise ValueError(f"model class is missing field {exc}") from exc
    raise ValueError(f"unknown model class variant {data.get('variant')!r}")
