"""Perturbation-based confidence intervals for the extreme value index."""

from .distributions import (
    DistributionSpec,
    GpdParams,
    NoiseRate,
    RgpdParams,
    gpd_cdf,
    gpd_quantile,
    noise_shift_cdf,
    rgpd_cdf,
    rgpd_quantile,
    sample,
    true_tail_params,
)
from .exceptions import DomainError, InvalidRgpdParams, NumericError, RgpdFitError
from .intervals import ConfidenceInterval, ci_an, ci_boot, ci_para, ci_pivotal, ci_ptb, ci_rptb
from .perturbation import perturb_scale, ptb_pivotal, rptb_pivotal
from .simulation import StudyConfig, run_study, sensitivity_sweep
from .tail_estimators import Sample, exceedances, gpd_theta_hat, hill, rgpd_fit

__all__ = [
    "ConfidenceInterval",
    "DistributionSpec",
    "DomainError",
    "GpdParams",
    "InvalidRgpdParams",
    "NoiseRate",
    "NumericError",
    "RgpdFitError",
    "RgpdParams",
    "Sample",
    "StudyConfig",
    "ci_an",
    "ci_boot",
    "ci_para",
    "ci_pivotal",
    "ci_ptb",
    "ci_rptb",
    "exceedances",
    "gpd_cdf",
    "gpd_quantile",
    "gpd_theta_hat",
    "hill",
    "noise_shift_cdf",
    "perturb_scale",
    "ptb_pivotal",
    "rgpd_cdf",
    "rgpd_fit",
    "rgpd_quantile",
    "rptb_pivotal",
    "run_study",
    "sample",
    "sensitivity_sweep",
    "true_tail_params",
]
