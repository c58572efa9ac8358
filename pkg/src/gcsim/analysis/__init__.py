"""Fitting, peak decomposition and scalar budget calculators."""

from .budget import (
    REFERENCE_CHAIN,
    EfficiencyChain,
    beta_factor,
    cooperativity_estimate,
    deconvolve_lorentzian,
    efficiency_budget,
)
from .fitting import FitResult, fit_curve, get_model, model_names, poisson_sigma, profile_sigma
from .models import (
    fit_exponential_lifetime,
    fit_gaussian,
    fit_hom,
    fit_lorentzian,
    fit_saturation,
)
from .peaks import fit_peak_amplitudes, leak_fraction_from_ratio, peak_template

__all__ = [
    "REFERENCE_CHAIN",
    "EfficiencyChain",
    "FitResult",
    "beta_factor",
    "cooperativity_estimate",
    "deconvolve_lorentzian",
    "efficiency_budget",
    "fit_curve",
    "fit_exponential_lifetime",
    "fit_gaussian",
    "fit_hom",
    "fit_lorentzian",
    "fit_peak_amplitudes",
    "fit_saturation",
    "get_model",
    "leak_fraction_from_ratio",
    "model_names",
    "peak_template",
    "poisson_sigma",
    "profile_sigma",
]
