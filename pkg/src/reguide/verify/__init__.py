"""Gaussian oracles for the guided sampler."""

from reguide.verify.analytic import (
    AnalyticReport,
    GaussianSpec,
    QuadraticReward,
    analytic_denoiser,
    chain_moments,
    importance_moments,
    product_oracle,
    run_analytic_check,
)

__all__ = [
    "AnalyticReport",
    "GaussianSpec",
    "QuadraticReward",
    "analytic_denoiser",
    "chain_moments",
    "importance_moments",
    "product_oracle",
    "run_analytic_check",
]
