"""Weighted least squares on the observed-outcome rows."""

import logging
import math
from collections.abc import Sequence
from dataclasses import replace

import numpy as np

from ..config import EstimatorType
from ..inference import CovarianceMethod, CovarianceRequest, covariance
from ..model.types import Dataset, ModelSpec
from ..results import FitResult, ScoreContext
from .base import Estimator, observed_rows, require_full_rank

logger = logging.getLogger(__name__)


def fit_ols(
    y: np.ndarray,
    x: np.ndarray,
    weights: np.ndarray | None = None,
    names: Sequence[str] | None = None,
    request: CovarianceRequest | None = None,
    cluster_id: np.ndarray | None = None,
) -> FitResult:
    """Least squares of ``y`` on ``x``.

    Weights are rescaled to sum to n, so the classical covariance
    s^2 (X'WX)^-1 does not depend on their scale. Robust and cluster requests
    use the sandwich with the same bread.

    Raises:
        RankDeficiencyError: naming the collinear columns of ``x``
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, p = x.shape
    labels = list(names) if names else [f"x{k}" for k in range(p)]
    require_full_rank(x, labels)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    w = w * n / w.sum()

    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(x * sw[:, None], y * sw, rcond=None)
    resid = y - x @ beta
    dof = max(n - p, 1)
    s2 = float(w @ resid**2) / dof
    xtwx = x.T @ (w[:, None] * x)

    def gradient(b: np.ndarray) -> np.ndarray:
        return np.asarray(x.T @ (w * (y - x @ b)))

    def weighted_scores(b: np.ndarray) -> np.ndarray:
        return np.asarray((w * (y - x @ b))[:, None] * x)

    context = ScoreContext(
        estimate=beta,
        gradient=gradient,
        weighted_scores=weighted_scores,
        cluster_id=np.arange(n) if cluster_id is None else np.asarray(cluster_id),
        hessian=lambda b: -xtwx,
    )
    method = CovarianceMethod(request.method) if request else CovarianceMethod.OBSERVED_INFORMATION
    if method is CovarianceMethod.OBSERVED_INFORMATION:
        cov = s2 * covariance(context)
        label = "classical"
    else:
        assert request is not None
        cov = covariance(context, request)
        label = method.value

    y_bar = float(w @ y) / n
    total = float(w @ (y - y_bar) ** 2)
    r_squared = 1.0 - float(w @ resid**2) / total if total > 0.0 else 1.0
    logger.debug("ols n=%d p=%d r_squared=%.4f", n, p, r_squared)
    return FitResult(
        estimator=EstimatorType.OLS.value,
        names=labels,
        params=beta,
        covariance=cov,
        derived={"r_squared": r_squared, "sigma": math.sqrt(s2)},
        covariance_label=label,
        n_obs=n,
        n_outcome=n,
        context=context,
    )


class OLSEstimator(Estimator):
    """OLS of the outcome on the outcome design, ignoring selection."""

    estimator_type = EstimatorType.OLS

    def __init__(self, stage: int | None = None, request: CovarianceRequest | None = None):
        self.stage = stage
        self.request = request

    def fit(self, data: Dataset, spec: ModelSpec) -> FitResult:
        data.conform(spec)
        rows = observed_rows(data, self.stage)
        request = self.request
        if request is not None and request.cluster_id is not None:
            override = np.asarray(request.cluster_id)
            if override.shape[0] == data.n:
                request = replace(request, cluster_id=override[rows])
        result = fit_ols(
            data.outcome[rows],
            data.x_outcome[rows],
            data.weight[rows],
            names=[f"beta[{name}]" for name in data.x_names],
            request=request,
            cluster_id=data.cluster_id[rows],
        )
        result.n_obs = data.n
        return result
