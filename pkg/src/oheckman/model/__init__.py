"""Ordered-selection model: types, normal helpers, packing and likelihood."""

from .likelihood import LikelihoodProblem, ordsel_loglik, stage_loglik, stage_probabilities
from .normal import (
    gaussian_cdf,
    gaussian_logpdf,
    gaussian_pdf,
    gaussian_quantile,
    log_prob_between,
)
from .params import (
    ParamLayout,
    cutoffs_from_packed,
    pack_params,
    reported_values,
    reporting_jacobian,
    unpack_params,
    unpack_with_layout,
)
from .types import (
    INTERCEPT,
    Dataset,
    LoglikReport,
    ModelSpec,
    ParamVector,
    RegimeParams,
)

__all__ = [
    "INTERCEPT",
    "Dataset",
    "LikelihoodProblem",
    "LoglikReport",
    "ModelSpec",
    "ParamLayout",
    "ParamVector",
    "RegimeParams",
    "cutoffs_from_packed",
    "gaussian_cdf",
    "gaussian_logpdf",
    "gaussian_pdf",
    "gaussian_quantile",
    "log_prob_between",
    "ordsel_loglik",
    "pack_params",
    "reported_values",
    "reporting_jacobian",
    "stage_loglik",
    "stage_probabilities",
    "unpack_params",
    "unpack_with_layout",
]
