"""
Predicting in a spectral-floor class
====================================

The class of states with every eigenvalue at least ``delta`` is unitarily
invariant and closed under pinching, so the quantum predictor for ``rho``
shares its eigenbasis and its spectrum solves the classical floor
problem.  Here the direct matrix solve (projected gradient, no spectral
shortcut) is compared against the classical value.
"""

import numpy as np

from qmlp import SpectralFloor, qmlp
from qmlp.checks import prop1_check
from qmlp.linalg import op_norm, random_unitary

rng = np.random.default_rng(47)
u = random_unitary(2, rng)
rho = (u * np.array([0.9, 0.1])) @ u.conj().T
model = SpectralFloor(2, 0.3)

fit = qmlp(rho, model)
print("spectrum of the predictor:", np.round(np.linalg.eigvalsh(fit.optimizer), 6))
print(f"D(rho || sigma*) = {fit.value:.7f}")
print(f"||[sigma*, rho]|| = {op_norm(fit.optimizer @ rho - rho @ fit.optimizer):.1e}")

rep = prop1_check(rho, model)
print(f"matrix solve {rep.quantum_value:.9f}  classical {rep.classical_value:.9f}  gap {rep.gap:.1e}")
