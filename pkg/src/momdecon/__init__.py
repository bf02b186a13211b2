"""Finite-support deconvolution by the classical moment problem.

Given a sample of ``X = Y * Z`` or ``X = Y + Z`` with the law of Z known and
Y concentrated on finitely many points, estimate the number of points from
Hankel determinants of Y's deconvolved moments, then the points and their
weights from the associated orthonormal polynomials.
"""

__version__ = "0.1.0"

from .errors import (
    AssumptionBViolation,
    ComplexRootError,
    ComponentCollapseError,
    DeconvolutionError,
    EstimationError,
    NegativeSupportError,
)
from .gof import GofReport, ad_statistic, bootstrap_pvalue, cvm_statistic, ks_statistic, mixture_cdf
from .hankel import HankelReport, estimate_k, hankel_determinant
from .known_components import MomentProvider, check_assumptions, moment, squared_provider
from .moments import MomentSequence, deconvolve_location, deconvolve_scale, empirical_moments, even_reduce
from .orthopoly import DiscreteDistribution, Polynomial, assemble, orthonormal_family, roots, weights
from .pipeline import FitResult, fit_sample
from .refine import MixtureModel, em_fit, initial_model
from .simlab import ExperimentConfig, ExperimentSummary, preset, run_experiment, sample_mixture
