"""Exact convolution models, compound Poisson corrections, and certified
total variation bounds for sums of multivariate Bernoulli factors."""

from .bounds import (
    BoundReport,
    Coefficients,
    ORDER_CAPS,
    OrderConstants,
    coarse_geometric_coefficient,
    coarse_linear_coefficient,
    coefficients,
    geometric_coefficient,
    linear_coefficient,
    lower_bounds,
    order_constants,
    series_weight,
    upper_bounds,
)
from .measures import (
    DEFAULT_TOL,
    DimensionMismatchError,
    ResourceCapError,
    SeriesDivergenceError,
    SeriesSpec,
    SignedMeasure,
    convolve,
    dirac,
    exp_measure,
    exp_series,
    linear_combine,
    prune,
    series_apply,
    total_mass,
    tv_norm,
)
from .model import (
    ExactTvResult,
    ModelSpec,
    compound_poisson,
    corrected_approximation,
    exact_distribution,
    exact_tv,
    exact_tv_many,
    factor,
    factor_residual,
    factor_residuals,
    marginalize,
    newton_elementary,
    power_sum,
    reference_example,
)
from .pointprocess import (
    PointProcessSpec,
    pp_bounds,
    process_coefficients,
    ratio_integrals,
    supremum_ratios,
)
from .smoothness import (
    CompensatedConstants,
    OrthogonalityCheck,
    PUBLISHED_DK,
    SmoothnessInstance,
    SplitParams,
    charlier,
    compensated_constants,
    compensated_residual_norm,
    norm_bounds,
    norm_product_exact,
    poisson_pmf,
    poisson_product_measure,
    published_dk,
    tabulated_constant,
    verify_orthogonality,
)
from .verify import SuiteReport, run_suite

__all__ = [
    "BoundReport",
    "Coefficients",
    "CompensatedConstants",
    "DEFAULT_TOL",
    "DimensionMismatchError",
    "ExactTvResult",
    "ModelSpec",
    "ORDER_CAPS",
    "PUBLISHED_DK",
    "OrderConstants",
    "OrthogonalityCheck",
    "PointProcessSpec",
    "ResourceCapError",
    "SeriesDivergenceError",
    "SeriesSpec",
    "SignedMeasure",
    "SmoothnessInstance",
    "SplitParams",
    "SuiteReport",
    "charlier",
    "coarse_geometric_coefficient",
    "coarse_linear_coefficient",
    "coefficients",
    "compensated_constants",
    "compensated_residual_norm",
    "compound_poisson",
    "convolve",
    "corrected_approximation",
    "dirac",
    "exact_distribution",
    "exact_tv",
    "exact_tv_many",
    "exp_measure",
    "exp_series",
    "factor",
    "factor_residual",
    "factor_residuals",
    "geometric_coefficient",
    "linear_coefficient",
    "linear_combine",
    "lower_bounds",
    "marginalize",
    "newton_elementary",
    "norm_bounds",
    "norm_product_exact",
    "order_constants",
    "poisson_pmf",
    "poisson_product_measure",
    "power_sum",
    "pp_bounds",
    "process_coefficients",
    "prune",
    "published_dk",
    "ratio_integrals",
    "reference_example",
    "run_suite",
    "series_apply",
    "series_weight",
    "supremum_ratios",
    "tabulated_constant",
    "total_mass",
    "tv_norm",
    "upper_bounds",
    "verify_orthogonality",
]
