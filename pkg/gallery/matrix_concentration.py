"""
Matrix Hoeffding and Bernstein tails
====================================

Rademacher sums of fixed Hermitian matrices and sums of i.i.d. centered
rank-one projectors, against the dimension-dependent exponential bounds.
"""

import numpy as np

from qmlp import covariance_embed, make_embedding, matrix_concentration_check, sample_iid
from qmlp.experiments import CenteredEmbedding, FixedMatrices

n, d = 500, 4
p = np.full(d, 1 / d)
emb = make_embedding("onehot", d)
rho_p = covariance_embed(p, emb)
proj = np.einsum("xi,xj->xij", emb.vectors, emb.vectors.conj())

h = (proj[sample_iid(p, n, 7).symbols] - rho_p) / np.sqrt(n)
res = matrix_concentration_check("hoeffding", FixedMatrices(h), n, [0.5, 1.0, 2.0], 10_000, 107)
print(f"Hoeffding, V^2 = {res.v2:.3f}; mean {res.mean['empirical']:.3f} <= {res.mean['bound']:.3f}")
for r in res.rows:
    print(f"  t={r['t']:4.2f}  P(||S|| >= t) = {r['exceedance']:.4f}  bound {r['rhs']:.4f}")

res = matrix_concentration_check("bernstein", CenteredEmbedding(p, emb, 1 / n), n, [0.05, 0.1, 0.2], 10_000, 107)
print(f"Bernstein, Vbar^2 = {res.v2:.2e}, M = {res.m:.1e}")
for r in res.rows:
    print(f"  t={r['t']:4.2f}  P(||S|| >= t) = {r['exceedance']:.4f}  bound {r['rhs']:.4f}")
