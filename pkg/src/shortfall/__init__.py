"""Utility-based shortfall risk: estimation, bounds, and minimization.

The shortfall risk of a loss Z at threshold lam is the smallest offset t
such that the expected utility of the excess, E[l(Z - t)], drops to lam.
This package provides exact values for analytic laws, the sample-average
estimator with concentration-bound calculators, an ERM oracle over linear
models, a level-bisection trainer for risk-minimal regression, and a
verification suite with a CLI front end.
"""

__version__ = "0.1.0"

from .distributions import (
    DistributionModel,
    EmptyAcceptanceSetError,
    Exponential,
    FiniteDiscrete,
    Gaussian,
    Mixture,
    PointMass,
    SampleVector,
    Uniform,
    l_f_derivative_exact,
    l_f_exact,
    parse_distribution,
    ubsr_exact,
)
from .estimator import (
    SrProblem,
    TailSpec,
    UbsrEstimate,
    bound_subexponential,
    bound_subgaussian,
    certify_problem,
    estimate_ubsr,
    q_n,
)
from .lmo import LinearModel, LmoResult, LmoSettings, RegressionDataset, solve, surrogate_loss
from .optimizer import BisectionConfig, BisectionTrace, split_dataset, train, ubsr_of_model
from .rootfind import BracketExpansionError
from .utility import UtilityFunction, blend, hinge, linear, parse_utility
