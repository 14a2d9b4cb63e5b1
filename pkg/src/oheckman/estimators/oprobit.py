"""Ordered probit of the stage codes."""

import logging

import numpy as np

from ..config import EstimatorType
from ..errors import ConfigError, DataError
from ..inference import CovarianceRequest, covariance_label
from ..model.likelihood import LikelihoodProblem
from ..model.normal import gaussian_quantile
from ..model.params import ParamLayout, reported_values, unpack_with_layout
from ..model.types import Dataset, ModelSpec
from ..results import FitResult
from .base import Estimator
from .optimize import exclusion_test, fitted_covariance, maximize, predicted_stage_shares

logger = logging.getLogger(__name__)

# |alpha_k| * sd(z_k) beyond this is reported as a diverging coefficient
_DIVERGENCE_SCALE = 5.0


def probit_start(data: Dataset, n_stages: int) -> np.ndarray:
    """Packed start: alpha = 0 and cutoffs at the normal quantiles of the
    cumulative weighted stage shares."""
    w = data.weight
    counts = np.bincount(data.stage, weights=w, minlength=n_stages)
    cumulative = np.cumsum(counts)[:-1] / w.sum()
    mu = np.asarray(gaussian_quantile(cumulative))
    return np.concatenate([np.zeros(data.z_selection.shape[1]), mu[:1], np.log(np.diff(mu))])


def _diverging(alpha: np.ndarray, data: Dataset) -> list[str]:
    spread = data.z_selection.std(axis=0)
    scaled = np.abs(alpha) * np.where(spread > 0, spread, 1.0)
    return [data.z_names[k] for k in np.flatnonzero(scaled > _DIVERGENCE_SCALE)]


def fit_ordered_probit(
    data: Dataset,
    spec: ModelSpec | None = None,
    n_stages: int | None = None,
    request: CovarianceRequest | None = None,
    max_iter: int | None = None,
    gradient_tol: float | None = None,
) -> FitResult:
    """Maximize the stage-only likelihood.

    Outcomes are ignored. With ``spec`` the exclusion-restriction Wald test
    is added to ``derived``.

    Raises:
        DataError: if a stage code in 0..J-1 never occurs
    """
    if spec is None and n_stages is None:
        raise ConfigError("fit_ordered_probit needs a spec or n_stages")
    n_stages = spec.n_stages if spec is not None else int(n_stages)  # type: ignore[arg-type]
    if np.any(data.stage >= n_stages):
        raise DataError(f"stage codes must lie in 0..{n_stages - 1}")
    counts = np.bincount(data.stage, minlength=n_stages)
    absent = np.flatnonzero(counts == 0).tolist()
    if absent:
        raise DataError(f"stages {absent} never occur; the cutoffs are not identified")

    problem = LikelihoodProblem.stages_only(data, n_stages)
    layout: ParamLayout = problem.layout
    outcome = maximize(problem, probit_start(data, n_stages), max_iter, gradient_tol)
    packed_cov, cov, flags, context = fitted_covariance(problem, outcome.x, request)
    estimates = unpack_with_layout(outcome.x, layout)

    diverging = _diverging(estimates.alpha, data)
    if diverging:
        flags.append("diverging:" + ",".join(diverging))
        logger.warning("oprobit_diverging columns=%s", diverging)
    if not outcome.converged:
        flags.append("not_converged")
        logger.warning(
            "oprobit_not_converged iterations=%d gradient_norm=%.3e",
            outcome.n_iter,
            outcome.gradient_norm,
        )

    derived: dict[str, float] = {}
    if spec is not None:
        derived.update(exclusion_test(outcome.x, packed_cov, layout, spec))
    shares = predicted_stage_shares(estimates.alpha, estimates.mu, data.z_selection, data.weight)
    derived.update({f"share[{j}]": float(p) for j, p in enumerate(shares)})

    return FitResult(
        estimator=EstimatorType.OPROBIT.value,
        names=layout.names(data.z_names, ()),
        params=reported_values(outcome.x, layout),
        covariance=cov,
        loglik=outcome.loglik,
        converged=outcome.converged,
        n_iter=outcome.n_iter,
        gradient_norm=outcome.gradient_norm,
        derived=derived,
        estimates=estimates,
        packed=outcome.x,
        packed_covariance=packed_cov,
        layout=layout,
        covariance_label=covariance_label(request),
        n_obs=data.n,
        n_outcome=int(data.observed.sum()),
        flags=flags,
        context=context,
    )


class OrderedProbitEstimator(Estimator):
    estimator_type = EstimatorType.OPROBIT

    def __init__(self, request: CovarianceRequest | None = None):
        self.request = request

    def fit(self, data: Dataset, spec: ModelSpec) -> FitResult:
        return fit_ordered_probit(data, spec, request=self.request)
