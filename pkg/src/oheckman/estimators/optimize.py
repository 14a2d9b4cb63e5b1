"""Quasi-Newton maximization of packed-scale likelihoods."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..config import get_settings
from ..errors import SingularMatrixError
from ..inference import CovarianceRequest, covariance, numerical_hessian, wald_test
from ..model.likelihood import LikelihoodProblem
from ..model.normal import log_prob_between
from ..model.params import ParamLayout, reporting_jacobian
from ..model.types import ModelSpec
from ..results import ScoreContext

logger = logging.getLogger(__name__)

_POLISH_STEPS = 25


@dataclass
class OptimizeOutcome:
    """Best point found and its convergence diagnostics."""

    x: np.ndarray
    loglik: float
    converged: bool
    n_iter: int
    gradient_norm: float
    message: str


def _tolerance(loglik: float, n: int, gradient_tol: float) -> float:
    return gradient_tol * max(1.0, abs(loglik) / max(n, 1))


def maximize(
    problem: LikelihoodProblem,
    start: np.ndarray,
    max_iter: int | None = None,
    gradient_tol: float | None = None,
) -> OptimizeOutcome:
    """BFGS on the negative log-likelihood, then Newton polishing.

    Convergence means max|gradient| < gradient_tol * max(1, |loglik| / n).
    The polishing phase uses the finite-difference Hessian of the analytic
    gradient and only accepts steps that do not lower the likelihood.
    """
    settings = get_settings()
    max_iter = settings.max_iter if max_iter is None else max_iter
    gradient_tol = settings.gradient_tol if gradient_tol is None else gradient_tol

    start = np.asarray(start, dtype=float)
    initial = problem.evaluate(start)
    tol = _tolerance(initial.value, problem.n, gradient_tol)
    result = minimize(
        problem.negative,
        start,
        jac=True,
        method="BFGS",
        options={"maxiter": max_iter, "gtol": tol, "norm": np.inf},
    )
    x = np.asarray(result.x, dtype=float)
    report = problem.evaluate(x)
    if not np.isfinite(report.value) or report.value < initial.value:
        x, report = start, initial
    n_iter = int(result.nit)

    for _ in range(_POLISH_STEPS):
        grad_norm = float(np.max(np.abs(report.gradient))) if report.gradient.size else 0.0
        if grad_norm < _tolerance(report.value, problem.n, gradient_tol):
            break
        if n_iter >= max_iter:
            break
        hess = numerical_hessian(problem.gradient, x)
        try:
            step = np.linalg.solve(-hess, report.gradient)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or step @ report.gradient <= 0.0:
            step = report.gradient / max(grad_norm, 1.0)
        accepted = False
        for _ in range(30):
            trial = x + step
            trial_report = problem.evaluate(trial)
            if np.isfinite(trial_report.value) and trial_report.value >= report.value:
                x, report, accepted = trial, trial_report, True
                break
            step = step / 2.0
        n_iter += 1
        if not accepted:
            break

    grad_norm = float(np.max(np.abs(report.gradient))) if report.gradient.size else 0.0
    converged = grad_norm < _tolerance(report.value, problem.n, gradient_tol)
    logger.debug(
        "maximize converged=%s iterations=%d loglik=%.6f gradient_norm=%.3e",
        converged,
        n_iter,
        report.value,
        grad_norm,
    )
    return OptimizeOutcome(
        x=x,
        loglik=report.value,
        converged=converged,
        n_iter=n_iter,
        gradient_norm=grad_norm,
        message=str(result.message),
    )


def fitted_covariance(
    problem: LikelihoodProblem,
    packed: np.ndarray,
    request: CovarianceRequest | None = None,
) -> tuple[np.ndarray, np.ndarray, list[str], ScoreContext]:
    """Packed and reported covariances at the optimum.

    A singular information matrix yields NaN covariances and a flag so the
    point estimates are still reported.
    """
    context = ScoreContext(
        estimate=np.asarray(packed, dtype=float),
        gradient=problem.gradient,
        weighted_scores=problem.weighted_scores,
        cluster_id=problem.cluster_id,
    )
    flags: list[str] = []
    try:
        packed_cov = covariance(context, request)
    except SingularMatrixError as exc:
        logger.warning("covariance_failed reason=%s", exc)
        packed_cov = np.full((problem.layout.size, problem.layout.size), np.nan)
        flags.append("singular_information")
    jac = reporting_jacobian(packed, problem.layout)
    return packed_cov, jac @ packed_cov @ jac.T, flags, context


def exclusion_test(
    packed: np.ndarray, packed_cov: np.ndarray, layout: ParamLayout, spec: ModelSpec
) -> dict[str, float]:
    """Joint Wald test that the excluded selection coefficients are zero."""
    restriction = np.zeros((len(spec.exclusion_columns), layout.size))
    for row, column in enumerate(spec.exclusion_columns):
        restriction[row, layout.alpha.start + column] = 1.0
    if not np.all(np.isfinite(packed_cov)):
        return {"exclusion_wald": float("nan"), "exclusion_p_value": float("nan")}
    try:
        test = wald_test(packed, packed_cov, restriction)
    except SingularMatrixError:
        return {"exclusion_wald": float("nan"), "exclusion_p_value": float("nan")}
    return {"exclusion_wald": test.statistic, "exclusion_p_value": test.p_value}


def predicted_stage_shares(
    alpha: np.ndarray, mu: np.ndarray, z: np.ndarray, weight: np.ndarray
) -> np.ndarray:
    """Weighted average predicted probability of each stage."""
    index = np.asarray(z) @ np.asarray(alpha)
    cuts = np.concatenate([[-np.inf], mu, [np.inf]])
    lower = cuts[None, :-1] - index[:, None]
    upper = cuts[None, 1:] - index[:, None]
    probs = np.exp(log_prob_between(lower, upper))
    return np.asarray(weight @ probs / weight.sum())
