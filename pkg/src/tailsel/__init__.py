"""Feature selection by A2-copula upper-tail dependence, with MI and GA baselines."""

from tailsel.copula_core import (
    PseudoSample,
    ThetaEstimate,
    copula_cdf,
    copula_density,
    fit_theta_mle,
    fit_theta_tau,
    generator,
    generator_inverse,
    kendall_tau_empirical,
    kendall_tau_model,
    sample_conditional,
    upper_tail_coefficient,
)

__version__ = "0.1.0"

__all__ = [
    "PseudoSample",
    "ThetaEstimate",
    "copula_cdf",
    "copula_density",
    "fit_theta_mle",
    "fit_theta_tau",
    "generator",
    "generator_inverse",
    "kendall_tau_empirical",
    "kendall_tau_model",
    "sample_conditional",
    "upper_tail_coefficient",
]
