"""Covariance estimation, delta-method transforms, Wald tests and intervals."""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats

from .config import get_settings
from .errors import ConfigError, NumericalError, SingularMatrixError
from .model.normal import gaussian_quantile
from .results import FitResult, ScoreContext

logger = logging.getLogger(__name__)


class CovarianceMethod(str, Enum):
    """Covariance estimators for likelihood fits."""

    OBSERVED_INFORMATION = "observed_information"
    ROBUST = "robust"
    CLUSTER_ROBUST = "cluster_robust"


@dataclass(frozen=True)
class CovarianceRequest:
    """Which covariance to compute.

    ``cluster_id`` overrides the clusters carried by the fit context.
    """

    method: CovarianceMethod = CovarianceMethod.OBSERVED_INFORMATION
    cluster_id: np.ndarray | None = None
    small_sample_correction: bool = True


@dataclass(frozen=True)
class WaldTest:
    """Wald test of R theta = r."""

    restriction: np.ndarray
    target: np.ndarray
    statistic: float
    df: int
    p_value: float


@dataclass(frozen=True)
class DeltaTarget:
    """A scalar function of one packed parameter.

    transform is one of ``identity``, ``tanh``, ``exp`` or ``expm1``.
    """

    name: str
    index: int
    transform: str = "identity"


@dataclass(frozen=True)
class DeltaEstimate:
    estimate: float
    std_error: float


_TRANSFORMS: dict[str, tuple[Callable[[float], float], Callable[[float], float]]] = {
    "identity": (lambda t: t, lambda t: 1.0),
    "tanh": (np.tanh, lambda t: 1.0 - np.tanh(t) ** 2),
    "exp": (np.exp, np.exp),
    "expm1": (np.expm1, np.exp),
}


def covariance_label(request: CovarianceRequest | None) -> str:
    if request is None:
        return CovarianceMethod.OBSERVED_INFORMATION.value
    return CovarianceMethod(request.method).value


def numerical_hessian(
    gradient: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float | None = None
) -> np.ndarray:
    """Central finite differences of an analytic gradient, symmetrized."""
    h = get_settings().hessian_step if step is None else step
    x = np.asarray(x, dtype=float)
    k = x.size
    hess = np.empty((k, k))
    for j in range(k):
        up = x.copy()
        down = x.copy()
        up[j] += h
        down[j] -= h
        hess[:, j] = (gradient(up) - gradient(down)) / (2.0 * h)
    return 0.5 * (hess + hess.T)


def _inverse_pd(matrix: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(matrix)):
        raise SingularMatrixError(f"{what} contains non-finite entries")
    eigenvalues, vectors = np.linalg.eigh(matrix)
    scale = max(float(np.max(np.abs(eigenvalues))), 1e-300)
    if eigenvalues.min() <= 1e-12 * scale:
        raise SingularMatrixError(f"{what} is singular or not positive definite", eigenvalues)
    return np.asarray((vectors / eigenvalues) @ vectors.T)


def _symmetric(matrix: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.abs(matrix))), 1e-300)
    asymmetry = float(np.max(np.abs(matrix - matrix.T))) / scale
    if asymmetry > 1e-8:
        raise NumericalError(f"covariance asymmetry {asymmetry:.3e} exceeds 1e-8")
    return 0.5 * (matrix + matrix.T)


def cluster_sums(scores: np.ndarray, cluster_id: np.ndarray) -> np.ndarray:
    """Sum score rows within clusters (G x K)."""
    _, inverse = np.unique(np.asarray(cluster_id), return_inverse=True)
    sums = np.zeros((int(inverse.max()) + 1 if inverse.size else 0, scores.shape[1]))
    np.add.at(sums, inverse.reshape(-1), scores)
    return sums


def covariance(context: ScoreContext, request: CovarianceRequest | None = None) -> np.ndarray:
    """Covariance of the estimate in ``context`` on its own scale.

    Raises:
        SingularMatrixError: if the information matrix cannot be inverted
        ConfigError: if cluster ids do not cover every estimation row
    """
    request = request or CovarianceRequest()
    theta = context.estimate
    if context.hessian is not None:
        hess = np.asarray(context.hessian(theta))
    else:
        hess = numerical_hessian(context.gradient, theta)
    bread = _inverse_pd(-hess, "information matrix")
    method = CovarianceMethod(request.method)
    if method is CovarianceMethod.OBSERVED_INFORMATION:
        return _symmetric(bread)

    scores = context.weighted_scores(theta)
    if method is CovarianceMethod.ROBUST:
        meat = scores.T @ scores
    else:
        clusters = context.cluster_id if request.cluster_id is None else request.cluster_id
        clusters = np.asarray(clusters)
        if clusters.shape[0] != scores.shape[0]:
            raise ConfigError(
                f"cluster ids cover {clusters.shape[0]} rows, estimation uses {scores.shape[0]}"
            )
        sums = cluster_sums(scores, clusters)
        meat = sums.T @ sums
        n_clusters = sums.shape[0]
        if request.small_sample_correction and n_clusters > 1:
            meat = meat * n_clusters / (n_clusters - 1)
        logger.debug("cluster_covariance clusters=%d", n_clusters)
    return _symmetric(bread @ meat @ bread)


def delta_transform(fit: FitResult, targets: Sequence[DeltaTarget]) -> dict[str, DeltaEstimate]:
    """First-order delta-method estimates for scalar transforms of packed parameters."""
    estimate = fit.packed if fit.packed is not None else fit.params
    cov = fit.packed_covariance if fit.packed_covariance is not None else fit.covariance
    out: dict[str, DeltaEstimate] = {}
    for target in targets:
        try:
            func, deriv = _TRANSFORMS[target.transform]
        except KeyError:
            raise ConfigError(f"unknown transform {target.transform!r}") from None
        t = float(estimate[target.index])
        variance = float(cov[target.index, target.index])
        se = abs(float(deriv(t))) * np.sqrt(max(variance, 0.0))
        out[target.name] = DeltaEstimate(float(func(t)), float(se))
    return out


def wald_test(
    estimate: np.ndarray,
    cov: np.ndarray,
    restriction: np.ndarray,
    target: np.ndarray | None = None,
) -> WaldTest:
    """Wald statistic for R theta = r with a chi-square reference."""
    R = np.atleast_2d(np.asarray(restriction, dtype=float))
    r = np.zeros(R.shape[0]) if target is None else np.asarray(target, dtype=float).reshape(-1)
    if R.shape[1] != np.asarray(estimate).size:
        raise ConfigError("restriction matrix width does not match the parameter count")
    if np.linalg.matrix_rank(R) < R.shape[0]:
        raise ConfigError("restriction matrix must have full row rank")
    diff = R @ np.asarray(estimate, dtype=float) - r
    middle = R @ cov @ R.T
    middle = 0.5 * (middle + middle.T)
    eigenvalues = np.linalg.eigvalsh(middle)
    if eigenvalues.min() <= 1e-14 * max(float(np.abs(eigenvalues).max()), 1e-300):
        raise SingularMatrixError("R V R' is singular", eigenvalues)
    statistic = float(max(diff @ np.linalg.solve(middle, diff), 0.0))
    df = R.shape[0]
    return WaldTest(R, r, statistic, df, float(stats.chi2.sf(statistic, df)))


def wald(
    fit: FitResult,
    restriction: np.ndarray,
    target: np.ndarray | None = None,
    scale: str = "reported",
) -> WaldTest:
    """Wald test on the reported or the packed (optimizer) scale."""
    if scale == "packed" and fit.packed is not None and fit.packed_covariance is not None:
        return wald_test(fit.packed, fit.packed_covariance, restriction, target)
    if scale not in ("reported", "packed"):
        raise ConfigError(f"unknown scale {scale!r}")
    return wald_test(fit.params, fit.covariance, restriction, target)


def selection_matrix(names: Sequence[str], selected: Sequence[str]) -> np.ndarray:
    """Rows picking the named parameters (for zero restrictions)."""
    R = np.zeros((len(selected), len(names)))
    for row, name in enumerate(selected):
        R[row, list(names).index(name)] = 1.0
    return R


def equality_matrix(names: Sequence[str], first: str, second: str) -> np.ndarray:
    """Single row encoding theta[first] - theta[second] = 0."""
    R = np.zeros((1, len(names)))
    R[0, list(names).index(first)] = 1.0
    R[0, list(names).index(second)] = -1.0
    return R


def confidence_interval(fit: FitResult, level: float = 0.95) -> np.ndarray:
    """Normal-theory intervals (k x 2) on the reported scale."""
    if not 0.0 < level < 1.0:
        raise ConfigError(f"confidence level must lie in (0, 1), got {level}")
    z = float(gaussian_quantile((1.0 + level) / 2.0))
    se = fit.std_errors
    return np.column_stack([fit.params - z * se, fit.params + z * se])


def two_sided_p_value(estimate: float, std_error: float) -> float:
    """Normal two-sided p-value of estimate / std_error."""
    if std_error <= 0.0 or not np.isfinite(std_error):
        return float("nan")
    return float(2.0 * stats.norm.sf(abs(estimate / std_error)))
