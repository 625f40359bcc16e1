"""
How fast does the predictor converge?
=====================================

Sample ``n`` symbols from ``p``, embed the empirical distribution, mix in
``1/n`` of the maximally mixed state and fit the model class.  With the
full class the squared trace error decays like ``1/n``; with a spectral
floor that excludes ``rho_p`` it levels off at the approximation error.
"""

import numpy as np

from qmlp import ExperimentConfig, Full, SpectralFloor, make_embedding, run_rate_experiment

grid = (32, 128, 512, 2048)

full = ExperimentConfig(np.full(4, 0.25), make_embedding("onehot", 4), Full(4), grid, 400, master_seed=101)
res = run_rate_experiment(full)
print("full class")
for row in res.summary:
    print(f"  n={row['n']:5d}  E||s_n - rho_p||^2 = {row['mean_trace_err_sq']:.2e}  bound {row['rhs_conv_rate']:.2e}")
print(f"  log-log slope {res.slope_top_half:.3f}")

floor = ExperimentConfig(
    np.array([0.8, 0.2]), make_embedding("onehot", 2), SpectralFloor(2, 0.3), grid, 400, master_seed=102
)
res = run_rate_experiment(floor)
print(f"spectral floor (epsilon = {res.epsilon:.4f})")
for row in res.summary:
    print(f"  n={row['n']:5d}  E||s_n - rho_p||^2 = {row['mean_trace_err_sq']:.4f}")
# the limit is ||sigma*_p - rho_p||_1^2 = (2 * 0.1)^2 = 0.04
