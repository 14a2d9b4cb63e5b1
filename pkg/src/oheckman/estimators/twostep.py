"""Two-step control-function estimator and FIML starting values."""

import logging
import math

import numpy as np
from scipy.linalg import block_diag

from ..config import EstimatorType, get_settings
from ..model.likelihood import LikelihoodProblem
from ..model.normal import gaussian_logpdf, log_prob_between
from ..model.params import pack_params
from ..model.types import Dataset, ModelSpec, ParamVector, RegimeParams
from ..results import FitResult
from .base import Estimator
from .ols import fit_ols
from .oprobit import fit_ordered_probit

logger = logging.getLogger(__name__)

TWO_STEP_LABEL = "two-step, uncorrected"


def mills_terms(lower: np.ndarray, upper: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Generalized inverse-Mills ratio and its variance correction.

    Returns lambda = [phi(a) - phi(b)] / P and
    delta = lambda^2 - [a phi(a) - b phi(b)] / P with P = Phi(b) - Phi(a),
    so that Var(xi | a < xi < b) = 1 - delta.
    """
    a = np.asarray(lower, dtype=float)
    b = np.asarray(upper, dtype=float)
    log_p = log_prob_between(a, b)
    with np.errstate(invalid="ignore", over="ignore"):
        phi_a = np.where(np.isfinite(a), np.exp(gaussian_logpdf(a) - log_p), 0.0)
        phi_b = np.where(np.isfinite(b), np.exp(gaussian_logpdf(b) - log_p), 0.0)
        a_phi = np.where(np.isfinite(a), a * phi_a, 0.0)
        b_phi = np.where(np.isfinite(b), b * phi_b, 0.0)
    lam = phi_a - phi_b
    return lam, lam**2 - (a_phi - b_phi)


def fit_two_step(data: Dataset, spec: ModelSpec) -> FitResult:
    """Ordered probit, then per-regime OLS augmented by the Mills term.

    ``estimates`` carries the implied FIML starting values: beta from the
    second step, sigma^2 = mean(resid^2) + theta^2 mean(delta) and
    rho = theta / sigma clipped to the configured start range. The reported
    covariance is block-diagonal naive OLS and not corrected for the
    estimated first step.
    """
    data.conform(spec)
    settings = get_settings()
    probit = fit_ordered_probit(data, spec)
    assert probit.estimates is not None
    alpha, mu = probit.estimates.alpha, probit.estimates.mu
    index = data.z_selection @ alpha
    cuts = np.concatenate([[-np.inf], mu, [np.inf]])

    names = list(probit.names)
    params = [probit.params]
    covariances = [probit.covariance]
    derived = {k: v for k, v in probit.derived.items() if k.startswith("exclusion")}
    regimes: list[RegimeParams] = []
    dropped_total = 0

    for s in spec.outcome_stages:
        rows = np.flatnonzero(data.stage == s)
        lower = cuts[s] - index[rows]
        upper = cuts[s + 1] - index[rows]
        keep = np.exp(log_prob_between(lower, upper)) >= settings.mills_min_denominator
        dropped = int(np.sum(~keep))
        if dropped:
            logger.warning("twostep_dropped stage=%d rows=%d", s, dropped)
        rows, lower, upper = rows[keep], lower[keep], upper[keep]
        dropped_total += dropped

        lam, delta = mills_terms(lower, upper)
        design = np.column_stack([data.x_outcome[rows], lam])
        labels = [f"beta{s}[{name}]" for name in data.x_names] + [f"theta{s}"]
        step = fit_ols(data.outcome[rows], design, data.weight[rows], names=labels)

        beta, theta = step.params[:-1], float(step.params[-1])
        w = data.weight[rows] / data.weight[rows].sum()
        resid = data.outcome[rows] - design @ step.params
        sigma2 = float(w @ resid**2) + theta**2 * float(w @ delta)
        if sigma2 <= 0.0:
            sigma2 = float(w @ resid**2)
        sigma = math.sqrt(sigma2)
        clip = settings.rho_start_clip
        rho = float(np.clip(theta / sigma, -clip, clip))
        regimes.append(RegimeParams(beta=beta, sigma=sigma, rho=rho))

        names += labels
        params.append(step.params)
        covariances.append(step.covariance)
        derived[f"theta{s}"] = theta
        derived[f"sigma{s}"] = sigma
        derived[f"rho{s}"] = rho
        derived[f"dropped{s}"] = float(dropped)

    derived["dropped"] = float(dropped_total)
    estimates = ParamVector(alpha=alpha, mu=mu, regimes=tuple(regimes))
    problem = LikelihoodProblem(data, spec.n_stages, spec)
    loglik = problem.evaluate(pack_params(estimates)).value
    logger.info(
        "twostep_done regimes=%d dropped=%d loglik=%.4f", spec.n_regimes, dropped_total, loglik
    )
    return FitResult(
        estimator=EstimatorType.TWOSTEP.value,
        names=names,
        params=np.concatenate(params),
        covariance=block_diag(*covariances),
        loglik=loglik,
        converged=probit.converged,
        n_iter=probit.n_iter,
        gradient_norm=probit.gradient_norm,
        derived=derived,
        estimates=estimates,
        covariance_label=TWO_STEP_LABEL,
        n_obs=data.n,
        n_outcome=int(data.observed.sum()),
        flags=list(probit.flags),
    )


class TwoStepEstimator(Estimator):
    estimator_type = EstimatorType.TWOSTEP

    def fit(self, data: Dataset, spec: ModelSpec) -> FitResult:
        return fit_two_step(data, spec)
