"""Nonparametric vine copulas with conditional pair-copulas."""

from ._ncvine import (
    CopulaFit,
    FittedVine,
    __version__,
    dgp_log_density,
    fit_copula,
    fit_vine,
    kl_oos,
    posterior_prob,
    roc,
    simulate,
    sparse_basis_size,
    test_simplifying,
)

__all__ = [
    "CopulaFit",
    "FittedVine",
    "__version__",
    "dgp_log_density",
    "fit_copula",
    "fit_vine",
    "kl_oos",
    "posterior_prob",
    "roc",
    "simulate",
    "sparse_basis_size",
    "test_simplifying",
]
