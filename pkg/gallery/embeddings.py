"""
Embedding a distribution as a density operator
==============================================

A pmf ``p`` over ``k`` symbols becomes ``rho_p = sum_x p(x) |phi(x)><phi(x)|``.
With one-hot features this is just ``diag(p)``; with overlapping features
distinct distributions move closer together, and the quantum relative
entropy between embeddings never exceeds the classical KL divergence.
"""

import numpy as np

from qmlp import covariance_embed, kl, make_embedding, qre

p = np.array([0.5, 0.3, 0.2])
q = np.array([0.2, 0.3, 0.5])

print("one-hot embedding is diag(p):")
print(np.round(covariance_embed(p, make_embedding("onehot", 3)).real, 3))

print(f"\nkl(p, q) = {kl(p, q):.4f}")
print("angle   D(rho_p || rho_q)")
for angle in (0.2, 0.6, 1.0, np.pi / 2):
    emb = make_embedding("simplex_cap", 3, angle=angle)
    d = qre(covariance_embed(p, emb), covariance_embed(q, emb))
    print(f"{angle:5.2f}   {d:.4f}")
# at a right angle the features are orthonormal and the two divergences agree
