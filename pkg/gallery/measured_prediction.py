"""
Seeing the predictor through a measurement
==========================================

Fit ``rho_hat_n`` by QMLP, then measure both in the eigenbasis of
``rho_p``.  Data processing orders the measured KL below the quantum
relative entropy, and the classical route (fit the measured counts
directly) is below both.
"""

import numpy as np

from qmlp import ExperimentConfig, SpectralFloor, make_embedding, regret_comparison

for angle in (0.4, 0.9, np.pi / 2):
    cfg = ExperimentConfig(
        np.array([0.5, 0.3, 0.2]),
        make_embedding("simplex_cap", 3, angle=angle),
        SpectralFloor(3, 0.2),
        (20, 200),
        50,
        master_seed=109,
    )
    for row in regret_comparison(cfg):
        print(
            f"angle {angle:4.2f} n={row['n']:4d}  classical {row['classical_value']:.4f}  "
            f"measured {row['quantum_measured']:.4f}  qre {row['quantum_qre']:.4f}  ordered {row['ordering_holds']}"
        )
