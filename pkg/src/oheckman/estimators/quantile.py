"""Linear quantile regression and the low-value imputation estimator."""

import logging
from collections.abc import Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ..config import EstimatorType
from ..errors import ConfigError, DataError, NumericalError
from ..model.types import Dataset, ModelSpec
from ..results import QuantileFit
from .base import Estimator, require_full_rank

logger = logging.getLogger(__name__)


def check_loss(resid: np.ndarray, tau: float, weights: np.ndarray | None = None) -> float:
    """Sum of w * u * (tau - 1{u < 0})."""
    u = np.asarray(resid, dtype=float)
    w = np.ones_like(u) if weights is None else np.asarray(weights, dtype=float)
    return float(w @ (u * (tau - (u < 0.0))))


def _constant_column(x: np.ndarray) -> int | None:
    for k in range(x.shape[1]):
        col = x[:, k]
        if col[0] != 0.0 and np.all(col == col[0]):
            return k
    return None


def fit_quantile(
    y: np.ndarray,
    x: np.ndarray,
    tau: float,
    weights: np.ndarray | None = None,
    names: Sequence[str] | None = None,
) -> QuantileFit:
    """Minimize the weighted check loss as a linear program.

    The dual simplex returns a vertex of the optimal face, so ties between
    order statistics resolve deterministically.

    Raises:
        ConfigError: if tau is outside (0, 1)
        RankDeficiencyError: if ``x`` lacks full column rank
        NumericalError: if the solver does not reach an optimum
    """
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must lie in (0, 1), got {tau}")
    y = np.asarray(y, dtype=float).reshape(-1)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, p = x.shape
    labels = list(names) if names else [f"x{k}" for k in range(p)]
    require_full_rank(x, labels)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).reshape(-1)

    constant = _constant_column(x)
    if n and constant is not None and np.all(y == y[0]):
        coefficients = np.zeros(p)
        coefficients[constant] = y[0] / x[0, constant]
        return QuantileFit(
            tau=tau, coefficients=coefficients, objective=0.0, names=labels, n_obs=n
        )

    identity = sparse.identity(n, format="csr")
    a_eq = sparse.hstack([sparse.csr_matrix(x), identity, -identity], format="csr")
    cost = np.concatenate([np.zeros(p), tau * w, (1.0 - tau) * w])
    bounds = [(None, None)] * p + [(0.0, None)] * (2 * n)
    result = linprog(cost, A_eq=a_eq, b_eq=y, bounds=bounds, method="highs-ds")
    if result.status != 0:
        raise NumericalError(f"quantile regression failed: {result.message}")
    coefficients = np.asarray(result.x[:p])
    objective = check_loss(y - x @ coefficients, tau, w)
    logger.debug("quantile tau=%.3f n=%d objective=%.6f", tau, n, objective)
    return QuantileFit(
        tau=tau, coefficients=coefficients, objective=objective, names=labels, n_obs=n
    )


def fit_imputation(
    data: Dataset,
    spec: ModelSpec,
    tau: float,
    imputed_value: float | None = None,
) -> QuantileFit:
    """Quantile regression after giving every unobserved outcome a low value.

    The value defaults to the minimum observed outcome. ``n_crossing`` counts
    imputed rows that are not strictly below the fitted hyperplane.

    Raises:
        DataError: if no outcome is observed
    """
    data.conform(spec)
    observed = data.observed
    if not observed.any():
        raise DataError("imputation needs at least one observed outcome")
    value = float(np.min(data.outcome[observed])) if imputed_value is None else imputed_value
    y = np.where(observed, data.outcome, value)
    fit = fit_quantile(y, data.x_outcome, tau, data.weight, names=data.x_names)

    imputed = ~observed
    fitted = data.x_outcome[imputed] @ fit.coefficients
    fit.n_imputed = int(imputed.sum())
    fit.n_crossing = int(np.sum(value >= fitted))
    fit.imputed_value = value
    if fit.n_crossing:
        logger.debug("imputation_crossing tau=%.3f rows=%d", tau, fit.n_crossing)
    return fit


class ImputationEstimator(Estimator):
    estimator_type = EstimatorType.IMPUTATION

    def __init__(self, tau: float = 0.5, imputed_value: float | None = None):
        self.tau = tau
        self.imputed_value = imputed_value

    def fit(self, data: Dataset, spec: ModelSpec) -> QuantileFit:
        return fit_imputation(data, spec, self.tau, self.imputed_value)
