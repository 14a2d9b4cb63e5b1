"""Estimators for ordered-selection data."""

from typing import Any

from ..config import EstimatorType
from ..errors import ConfigError
from .base import Estimator
from .heckman import (
    BinaryHeckmanEstimator,
    FimlOptions,
    OrderedHeckmanEstimator,
    binarize_stages,
    fit_ordered_heckman,
)
from .ols import OLSEstimator, fit_ols
from .oprobit import OrderedProbitEstimator, fit_ordered_probit
from .quantile import ImputationEstimator, check_loss, fit_imputation, fit_quantile
from .twostep import TWO_STEP_LABEL, TwoStepEstimator, fit_two_step, mills_terms


def create_estimator(kind: EstimatorType | str, **options: Any) -> Estimator:
    """Build an estimator by name.

    Options are passed to the estimator's constructor: ``request`` for
    ``ols``/``oprobit``, ``options`` (FimlOptions) for ``oheckman``/``heckman2``,
    ``tau`` and ``imputed_value`` for ``imputation``.
    """
    try:
        kind = EstimatorType(kind)
    except ValueError:
        raise ConfigError(f"unknown estimator {kind!r}") from None

    estimator: Estimator
    if kind == EstimatorType.OLS:
        estimator = OLSEstimator(**options)
    elif kind == EstimatorType.OPROBIT:
        estimator = OrderedProbitEstimator(**options)
    elif kind == EstimatorType.OHECKMAN:
        estimator = OrderedHeckmanEstimator(**options)
    elif kind == EstimatorType.HECKMAN2:
        estimator = BinaryHeckmanEstimator(**options)
    elif kind == EstimatorType.TWOSTEP:
        estimator = TwoStepEstimator(**options)
    else:
        estimator = ImputationEstimator(**options)
    return estimator


__all__ = [
    "BinaryHeckmanEstimator",
    "Estimator",
    "FimlOptions",
    "ImputationEstimator",
    "OLSEstimator",
    "OrderedHeckmanEstimator",
    "OrderedProbitEstimator",
    "TWO_STEP_LABEL",
    "TwoStepEstimator",
    "binarize_stages",
    "check_loss",
    "create_estimator",
    "fit_imputation",
    "fit_ols",
    "fit_ordered_heckman",
    "fit_ordered_probit",
    "fit_quantile",
    "fit_two_step",
    "mills_terms",
]
