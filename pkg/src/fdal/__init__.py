"""Domain-adversarial learning with f-divergences, plus the numerical
machinery to verify the bounds it rests on: a tape autodiff core, the
conjugate catalog, exhaustive and variational discrepancy estimators,
GRL min-max training, synthetic benchmarks, and a brute-force theory
oracle."""

from .autodiff import Tape, Tensor, finite_diff_check
from .divergences import (
    DivergenceSpec,
    DomainError,
    FiniteDistribution,
    analytic_f_divergence,
    analytic_gamma_js,
    catalog_names,
    eval_activation,
    eval_conjugate,
    eval_phi,
    gamma_rescale,
    get_spec,
    phi_prime,
)

__version__ = "0.1.0"
