"""Rank-based adequacy tests for VARMA models with elliptical innovations.

The package covers the full pipeline: elliptical sampling and radial
densities, VARMA residuals and Green's matrices, Tyler's scatter fit with
pseudo-Mahalanobis ranks, rank-based cross-covariances, the structural
matrices behind the quadratic-form statistics, fixed-score / Gaussian /
estimated-score tests, asymptotic-relative-efficiency calculators, and a
Monte Carlo validation harness.
"""
from .adaptive import RadialDensityEstimate, estimate_radial_density, statistic_adaptive
from .are import (
    are_adaptive,
    are_f_star,
    are_fixed_score,
    are_power_exponential,
    bessel_j,
    find_ck,
    spearman_lower_bound,
)
from .crosscov import crosscov_stack, parametric_crosscov, rank_crosscov
from .elliptical import (
    RadialDensity,
    RadialLaw,
    ScorePair,
    density_by_name,
    gaussian,
    laplace,
    make_score_pair,
    power_exponential,
    sample_elliptical,
    student,
)
from .mc import Experiment, McSummary, invariance_suite, run_experiment
from .structmat import StructuralSet, structural_set
from .teststat import (
    TestReport,
    chi2_quantile,
    chi2_upper_tail,
    noncentrality,
    statistic_gaussian,
    statistic_QK,
)
from .tyler import RankedResiduals, TylerFit, tyler_fit, tyler_residuals
from .varma import (
    GreenSeq,
    VarmaSpec,
    check_assumption_A,
    green_matrices,
    residuals,
    residuals_green_oracle,
    simulate,
)

__version__ = "0.1.0"
