"""Copula regression with additive predictors for all distribution parameters."""

from ._bcam import (
    DomainError,
    FitResult,
    InputError,
    Model,
    NumericalError,
    copula_cdf,
    copula_density,
    copula_h,
    copula_tags,
    load_csv,
    margin_cdf,
    margin_pdf,
    margin_quantile,
    run_cli,
    sample_copula,
    simulate,
    tau_to_theta,
    theta_to_tau,
)

__all__ = [
    "DomainError",
    "FitResult",
    "InputError",
    "Model",
    "NumericalError",
    "copula_cdf",
    "copula_density",
    "copula_h",
    "copula_tags",
    "load_csv",
    "margin_cdf",
    "margin_pdf",
    "margin_quantile",
    "run_cli",
    "sample_copula",
    "simulate",
    "tau_to_theta",
    "theta_to_tau",
]
