"""JSON encodings for matrices and vectors.

Matrices use ``{"dim": d, "rows": [[[re, im], ...], ...]}``; lists of
vectors use ``{"dim": d, "vectors": [[[re, im], ...], ...]}``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .linalg import as_hermitian


def _encode(z) -> list:
    return [float(z.real), float(z.imag)]


def matrix_to_json(a) -> dict:
    a = np.asarray(a, dtype=complex)
    return {"dim": int(a.shape[0]), "rows": [[_encode(z) for z in row] for row in a]}


def matrix_from_json(data: dict, hermitian: bool = True) -> np.ndarray:
    try:
        d = int(data["dim"])
        a = np.array([[complex(re, im) for re, im in row] for row in data["rows"]], dtype=complex)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if a.shape != (d, d):
        raise ValueError(f"matrix shape {a.shape} does not match dim {d}")
    return as_hermitian(a) if hermitian else a


def vectors_to_json(v) -> dict:
    """Columns of ``v`` as a vector list."""
    v = np.asarray(v, dtype=complex)
    return {"dim": int(v.shape[0]), "vectors": [[_encode(z) for z in col] for col in v.T]}


def vectors_from_json(data: dict) -> np.ndarray:
    """Inverse of :func:`vectors_to_json`; returns vectors as columns."""
    try:
        d = int(data["dim"])
        v = np.array([[complex(re, im) for re, im in vec] for vec in data["vectors"]], dtype=complex)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed vector JSON: {exc}") from exc
    if v.ndim != 2 or v.shape[1] != d:
        raise ValueError("vector lengths do not match dim")
    return v.T


def save_matrix(path, a) -> None:
    Path(path).write_text(json.dumps(matrix_to_json(a), indent=1) + "\n")


def load_matrix(path, hermitian: bool = True) -> np.ndarray:
    return matrix_from_json(json.loads(Path(path).read_text()), hermitian=hermitian)
