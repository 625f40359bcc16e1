"""Feature maps from a finite alphabet and covariance embeddings of pmfs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import sqrtm_psd
from .rng import stream
from .states import as_pmf, maximally_mixed

NORM_TOL = 1e-12
SPAN_TOL = 1e-10


@dataclass(frozen=True)
class FeatureEmbedding:
    """Unit vectors ``phi(x)`` for each symbol, stored as rows.

    ``vectors`` has shape ``(alphabet_size, dim)``.
    """

    vectors: np.ndarray
    kind: str = "explicit"

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"vectors must be a non-empty 2-d array, got {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        if np.max(np.abs(norms - 1.0)) > NORM_TOL:
            raise ValueError(f"feature vectors are not unit norm (max deviation {np.max(np.abs(norms - 1)):.2e})")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def alphabet_size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def gram(self) -> np.ndarray:
        return self.vectors.conj() @ self.vectors.T

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "vectors": [[[float(z.real), float(z.imag)] for z in row] for row in self.vectors],
        }

    @classmethod
    def from_json(cls, data: dict) -> "FeatureEmbedding":
        vecs = np.array(
            [[complex(re, im) for re, im in row] for row in data["vectors"]], dtype=complex
        )
        if vecs.ndim != 2 or vecs.shape[1] != int(data["dim"]):
            raise ValueError("vector lengths do not match the declared dim")
        return cls(vecs, kind="explicit")

    @classmethod
    def load(cls, path) -> "FeatureEmbedding":
        return cls.from_json(json.loads(Path(path).read_text()))


def _normalize_rows(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(norms < 1e-300):
        raise ValueError("cannot normalize a zero feature vector")
    return v / norms


def simplex_cap_vectors(alphabet_size: int, angle: float) -> np.ndarray:
    """Unit vectors with every pairwise inner product equal to ``cos(angle)``.

    Built from the square root of the Gram matrix ``c J + (1 - c) I``,
    which is the same configuration as a shared axis plus equal orthogonal
    perturbations.  ``angle = pi/2`` gives an orthonormal set, ``angle = 0``
    collapses every symbol onto one vector.
    """
    if not 0.0 <= angle <= np.pi / 2 + 1e-15:
        raise ValueError("simplex_cap angle must lie in [0, pi/2]")
    c = float(np.cos(angle))
    if abs(c) < 1e-15:
        c = 0.0
    k = alphabet_size
    gram = c * np.ones((k, k)) + (1 - c) * np.eye(k)
    return _normalize_rows(sqrtm_psd(gram).real.astype(complex))


def make_embedding(
    kind: str,
    alphabet_size: int,
    dim: int | None = None,
    seed: int = 0,
    *,
    angle: float | None = None,
    bandwidth: float | None = None,
    vectors=None,
) -> FeatureEmbedding:
    """Construct one of the built-in feature maps.

    Parameters
    ----------
    kind : {"onehot", "simplex_cap", "fourier", "explicit"}
    alphabet_size : int
        Number of symbols ``|X|``.
    dim : int, optional
        Ambient dimension.  Defaults to ``alphabet_size``.  ``onehot``
        needs ``dim >= alphabet_size`` and ``simplex_cap`` pads with zeros.
    seed : int
        Seed for the random frequencies of ``fourier``.
    angle : float
        Pairwise angle for ``simplex_cap``.
    bandwidth : float
        Length scale of the Gaussian kernel approximated by ``fourier``.
    vectors : array_like
        Rows of the ``explicit`` map.
    """
    if alphabet_size < 1:
        raise ValueError("alphabet_size must be positive")
    d = alphabet_size if dim is None else int(dim)
    if kind == "onehot":
        if d < alphabet_size:
            raise ValueError(f"onehot needs dim >= alphabet_size ({d} < {alphabet_size})")
        v = np.zeros((alphabet_size, d), dtype=complex)
        v[np.arange(alphabet_size), np.arange(alphabet_size)] = 1.0
    elif kind == "simplex_cap":
        if angle is None:
            raise ValueError("simplex_cap needs an angle")
        if d < alphabet_size:
            raise ValueError("simplex_cap needs dim >= alphabet_size")
        v = np.zeros((alphabet_size, d), dtype=complex)
        v[:, :alphabet_size] = simplex_cap_vectors(alphabet_size, angle)
    elif kind == "fourier":
        if bandwidth is None or bandwidth <= 0:
            raise ValueError("fourier needs a positive bandwidth")
        rng = stream(seed, "fourier")
        omega = rng.standard_normal(d) / bandwidth
        phase = rng.uniform(0.0, 2 * np.pi, d)
        x = np.arange(alphabet_size, dtype=float)[:, None]
        v = _normalize_rows(np.cos(x * omega[None, :] + phase[None, :])).astype(complex)
    elif kind == "explicit":
        if vectors is None:
            raise ValueError("explicit embedding needs vectors")
        v = np.asarray(vectors, dtype=complex)
        if v.shape[0] != alphabet_size:
            raise ValueError("explicit vectors do not match alphabet_size")
    else:
        raise ValueError(f"unknown embedding kind {kind!r}")
    return FeatureEmbedding(v, kind=kind)


def span_basis(emb: FeatureEmbedding, support=None, tol: float = SPAN_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the span of the selected feature vectors."""
    rows = emb.vectors if support is None else emb.vectors[np.asarray(support)]
    u, s, _ = np.linalg.svd(rows.T, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return u[:, :rank]


def reduce_to_span(emb: FeatureEmbedding, support=None) -> FeatureEmbedding:
    """Re-express the embedding in coordinates of its span.

    The span is that of ``{phi(x): x in support}`` (all symbols by default).
    A symbol outside ``support`` whose vector leaves the span is mapped to
    the first span basis vector; it has probability zero, so it never
    affects ``rho_p`` or a sample.
    """
    basis = span_basis(emb, support)
    coords = emb.vectors @ basis.conj()
    lost = np.abs(np.linalg.norm(coords, axis=1) - 1.0) > 1e-10
    if support is not None:
        inside = np.zeros(emb.alphabet_size, dtype=bool)
        inside[np.asarray(support)] = True
        if np.any(lost & inside):  # pragma: no cover - span contains its generators
            raise ArithmeticError("span reduction lost norm on a supported symbol")
        coords[lost] = 0.0
        coords[lost, 0] = 1.0
    return FeatureEmbedding(_normalize_rows(coords), kind=emb.kind)


def embedding_rank(emb: FeatureEmbedding) -> int:
    return span_basis(emb).shape[1]


def covariance_embed(p, emb: FeatureEmbedding) -> np.ndarray:
    """``rho_p = sum_x p(x) |phi(x)><phi(x)|``."""
    p = as_pmf(p)
    if p.size != emb.alphabet_size:
        raise ValueError(f"pmf has {p.size} entries, alphabet has {emb.alphabet_size}")
    v = emb.vectors
    rho = (v.T * p) @ v.conj()
    return (rho + rho.conj().T) / 2


@dataclass(frozen=True)
class EmpiricalSample:
    symbols: np.ndarray
    alphabet_size: int

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=np.int64)
        if s.ndim != 1:
            raise ValueError("symbols must be a 1-d sequence")
        if s.size and (s.min() < 0 or s.max() >= self.alphabet_size):
            raise ValueError("symbol index outside the alphabet")
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)

    @property
    def n(self) -> int:
        return self.symbols.size

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.symbols, minlength=self.alphabet_size)

    def empirical_pmf(self) -> np.ndarray:
        if self.n == 0:
            raise ValueError("empty sample")
        return self.counts / self.n


def empirical_embed(sample: EmpiricalSample, emb: FeatureEmbedding) -> np.ndarray:
    """``(1/n) sum_i |phi(x_i)><phi(x_i)|`` computed from the symbol counts."""
    if sample.n == 0:
        raise ValueError("empty sample")
    if sample.alphabet_size != emb.alphabet_size:
        raise ValueError("sample and embedding alphabets differ")
    return covariance_embed(sample.empirical_pmf(), emb)


def perturbed_empirical(rho_hat, n: int) -> np.ndarray:
    """Mix ``1/n`` of the maximally mixed state into ``rho_hat``."""
    if n < 1:
        raise ValueError("n must be positive")
    rho_hat = np.asarray(rho_hat, dtype=complex)
    d = rho_hat.shape[0]
    return (1 - 1 / n) * rho_hat + maximally_mixed(d) / n


def sample_iid(p, n: int, seed, *key) -> EmpiricalSample:
    """Draw ``n`` i.i.d. symbols by inverse-CDF lookup.

    Uniforms come from a counter-based Philox stream keyed by
    ``(seed, *key)``, so the same arguments always give the same sample.
    """
    p = as_pmf(p)
    if n < 1:
        raise ValueError("n must be positive")
    rng = stream(seed, *key)
    return EmpiricalSample(inverse_cdf(p, rng.random(n)), p.size)


def inverse_cdf(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, p.size - 1)
