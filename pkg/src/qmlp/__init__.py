"""Quantum maximum-likelihood prediction with embedded density operators.

A distribution ``p`` over a finite alphabet is embedded as the density
operator ``rho_p = sum_x p(x) |phi(x)><phi(x)|``; a predictor is the state in
a model class closest to it in quantum relative entropy.  The package
provides the linear algebra, divergences, projections, structural checks
and Monte Carlo harness around that construction.
"""

__version__ = "0.1.0"

from .bounds import BoundContext, compute_bound_context, rhs_conv_rate, rhs_experrorqrel
from .checks import pinch_class, prop1_check, prop3_bound_check
from .divergences import (
    kl,
    measured_re,
    pinsker_gap,
    qre,
    qre_variational_lb,
    thompson,
    variational_objective,
    von_neumann_entropy,
)
from .embedding import (
    EmpiricalSample,
    FeatureEmbedding,
    covariance_embed,
    empirical_embed,
    make_embedding,
    perturbed_empirical,
    reduce_to_span,
    sample_iid,
)
from .experiments import (
    ExperimentConfig,
    TrialRecord,
    matrix_concentration_check,
    regret_comparison,
    run_concentration_experiment,
    run_rate_experiment,
)
from .linalg import (
    NumericalError,
    SpectralDecomposition,
    SupportError,
    eig_hermitian,
    expm,
    logm,
    matrix_fn,
    op_norm,
    trace_norm,
)
from .models import ExponentialFamily, FiniteSet, FixedBasisDiagonal, Full, SpectralFloor
from .solve import (
    MixtureFamily,
    ProjectionResult,
    classical_mlp,
    diagonal_family,
    i_projection,
    i_projection_hull,
    pythagorean_residual,
    qmlp,
)
from .states import Povm, as_density, maximally_mixed, measure, pinch, spectrum_pmf
