"""Ordered-selection log-likelihood and its analytic gradient."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..config import get_settings
from ..errors import ConfigError
from .normal import gaussian_logpdf, log_prob_between
from .params import (
    ParamLayout,
    chain_mu_gradient,
    cutoffs_from_packed,
    layout_of,
    pack_params,
)
from .types import Dataset, LoglikReport, ModelSpec, ParamVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class _Pieces:
    """Per-observation log-contributions and derivative factors."""

    loglik: np.ndarray
    d_index: np.ndarray  # d l_i / d m_i
    d_lower: np.ndarray  # d l_i / d mu_j      (lower cutoff of the observed stage)
    d_upper: np.ndarray  # d l_i / d mu_{j+1}  (upper cutoff of the observed stage)
    d_beta: np.ndarray  # d l_i / d beta = d_beta * x_i
    d_log_sigma: np.ndarray
    d_atanh_rho: np.ndarray
    flagged: np.ndarray


class LikelihoodProblem:
    """Pre-processed data for repeated likelihood evaluation on the packed scale.

    With ``regimes=False`` only the ordered-probit stage terms are evaluated
    and the packed vector holds alpha and the cutoffs alone.
    """

    def __init__(
        self,
        data: Dataset,
        n_stages: int,
        spec: ModelSpec | None = None,
        floor: float | None = None,
    ):
        self.stage = np.asarray(data.stage, dtype=int)
        self.z = np.asarray(data.z_selection)
        self.x = np.asarray(data.x_outcome)
        self.y = np.asarray(data.outcome)
        self.weight = np.asarray(data.weight)
        self.cluster_id = np.asarray(data.cluster_id)
        self.n = data.n
        self.n_stages = n_stages
        self.spec = spec
        if spec is None:
            self.regime = np.full(self.n, -1, dtype=int)
            self.layout = ParamLayout(self.z.shape[1], n_stages, 0, 0)
        else:
            self.regime = spec.regime_index(self.stage)
            self.layout = ParamLayout.from_spec(spec, self.z.shape[1], self.x.shape[1])
        self.log_floor = math.log(floor if floor is not None else get_settings().loglik_floor)
        self._regime_rows = [
            np.flatnonzero(self.regime == r) for r in range(self.layout.n_regimes)
        ]
        self._plain_rows = np.flatnonzero(self.regime < 0)

    @classmethod
    def stages_only(cls, data: Dataset, n_stages: int) -> "LikelihoodProblem":
        return cls(data, n_stages, spec=None)

    def _pieces(self, packed: np.ndarray) -> _Pieces:
        layout = self.layout
        v = np.asarray(packed, dtype=float)
        mu = cutoffs_from_packed(v[layout.mu])
        cuts = np.concatenate([[-np.inf], mu, [np.inf]])
        index = self.z @ v[layout.alpha]
        lower = cuts[self.stage] - index
        upper = cuts[self.stage + 1] - index

        n = self.n
        loglik = np.empty(n)
        d_index = np.zeros(n)
        d_lower = np.zeros(n)
        d_upper = np.zeros(n)
        d_beta = np.zeros(n)
        d_log_sigma = np.zeros(n)
        d_atanh_rho = np.zeros(n)

        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            rows = self._plain_rows
            if rows.size:
                a, b = lower[rows], upper[rows]
                log_p = log_prob_between(a, b)
                g_a = np.exp(gaussian_logpdf(a) - log_p)
                g_b = np.exp(gaussian_logpdf(b) - log_p)
                loglik[rows] = log_p
                d_upper[rows] = g_b
                d_lower[rows] = -g_a
                d_index[rows] = g_a - g_b

            for r, rows in enumerate(self._regime_rows):
                if not rows.size:
                    continue
                beta = v[layout.beta(r)]
                sigma = math.exp(v[layout.sigma(r)])
                rho = math.tanh(v[layout.rho(r)])
                s = math.sqrt(max(1.0 - rho * rho, 1e-300))
                e = (self.y[rows] - self.x[rows] @ beta) / sigma
                a = (lower[rows] - rho * e) / s
                b = (upper[rows] - rho * e) / s
                log_p = log_prob_between(a, b)
                g_a = np.exp(gaussian_logpdf(a) - log_p)
                g_b = np.exp(gaussian_logpdf(b) - log_p)
                # phi(t) * t vanishes at infinite limits
                ga_a = np.where(np.isfinite(a), g_a * a, 0.0)
                gb_b = np.where(np.isfinite(b), g_b * b, 0.0)
                diff = g_b - g_a
                d_e = -e - rho * diff / s

                loglik[rows] = -math.log(sigma) + gaussian_logpdf(e) + log_p
                d_upper[rows] = g_b / s
                d_lower[rows] = -g_a / s
                d_index[rows] = -diff / s
                d_beta[rows] = -d_e / sigma
                d_log_sigma[rows] = -1.0 - d_e * e
                d_atanh_rho[rows] = -e * diff * s + rho * (gb_b - ga_a)

        bad = ~np.isfinite(loglik) | (loglik < self.log_floor)
        flagged = np.flatnonzero(bad)
        if flagged.size:
            loglik[bad] = self.log_floor
            for arr in (d_index, d_lower, d_upper, d_beta, d_log_sigma, d_atanh_rho):
                arr[bad] = 0.0
        return _Pieces(
            loglik, d_index, d_lower, d_upper, d_beta, d_log_sigma, d_atanh_rho, flagged
        )

    def _cutoff_scores(self, pieces: _Pieces) -> np.ndarray:
        """Per-observation derivatives with respect to mu (n x (J-1))."""
        n_mu = self.layout.n_mu
        out = np.zeros((self.n, n_mu))
        rows = np.arange(self.n)
        has_upper = self.stage <= n_mu - 1
        has_lower = self.stage >= 1
        out[rows[has_upper], self.stage[has_upper]] += pieces.d_upper[has_upper]
        out[rows[has_lower], self.stage[has_lower] - 1] += pieces.d_lower[has_lower]
        return out

    def evaluate(self, packed: np.ndarray, per_observation: bool = False) -> LoglikReport:
        """Weighted log-likelihood and packed gradient at ``packed``."""
        layout = self.layout
        v = np.asarray(packed, dtype=float)
        pieces = self._pieces(v)
        w = self.weight
        theta_mu = v[layout.mu]
        mu_scores = self._cutoff_scores(pieces)

        gradient = np.zeros(layout.size)
        gradient[layout.alpha] = self.z.T @ (w * pieces.d_index)
        gradient[layout.mu] = chain_mu_gradient(w @ mu_scores, theta_mu)
        for r, rows in enumerate(self._regime_rows):
            wr = w[rows]
            gradient[layout.beta(r)] = self.x[rows].T @ (wr * pieces.d_beta[rows])
            gradient[layout.sigma(r)] = wr @ pieces.d_log_sigma[rows]
            gradient[layout.rho(r)] = wr @ pieces.d_atanh_rho[rows]

        scores = None
        if per_observation:
            scores = np.zeros((self.n, layout.size))
            scores[:, layout.alpha] = pieces.d_index[:, None] * self.z
            scores[:, layout.mu] = chain_mu_gradient(mu_scores, theta_mu)
            for r, rows in enumerate(self._regime_rows):
                scores[rows, layout.beta(r)] = pieces.d_beta[rows, None] * self.x[rows]
                scores[rows, layout.sigma(r)] = pieces.d_log_sigma[rows]
                scores[rows, layout.rho(r)] = pieces.d_atanh_rho[rows]

        if pieces.flagged.size:
            logger.debug(
                "loglik_floor flagged=%d first=%d", pieces.flagged.size, pieces.flagged[0]
            )
        return LoglikReport(
            value=math.fsum(w * pieces.loglik),
            gradient=gradient,
            per_observation=pieces.loglik if per_observation else None,
            scores=scores,
            flagged=pieces.flagged,
        )

    def negative(self, packed: np.ndarray) -> tuple[float, np.ndarray]:
        """Objective and gradient for a minimizer."""
        report = self.evaluate(packed)
        return -report.value, -report.gradient

    def gradient(self, packed: np.ndarray) -> np.ndarray:
        return self.evaluate(packed).gradient

    def weighted_scores(self, packed: np.ndarray) -> np.ndarray:
        report = self.evaluate(packed, per_observation=True)
        assert report.scores is not None
        return report.scores * self.weight[:, None]


def ordsel_loglik(
    params: ParamVector,
    data: Dataset,
    spec: ModelSpec,
    per_observation: bool = False,
) -> LoglikReport:
    """Weighted log-likelihood of the ordered-selection model.

    Args:
        params: Parameter values; must carry one RegimeParams per outcome stage
        data: Observations conforming to ``spec``
        spec: Stage layout and outcome regimes
        per_observation: Also return log-contributions and per-observation scores

    Returns:
        LoglikReport with the gradient on the packed scale
    """
    data.conform(spec)
    if len(params.regimes) != spec.n_regimes or params.n_stages != spec.n_stages:
        raise ConfigError("parameter vector does not match the model specification")
    problem = LikelihoodProblem(data, spec.n_stages, spec)
    return problem.evaluate(pack_params(params), per_observation=per_observation)


def stage_loglik(
    params: ParamVector, data: Dataset, per_observation: bool = False
) -> LoglikReport:
    """Ordered-probit log-likelihood of the stage codes alone (outcomes ignored)."""
    stage_params = ParamVector(alpha=params.alpha, mu=params.mu)
    problem = LikelihoodProblem.stages_only(data, params.n_stages)
    layout = layout_of(stage_params)
    assert layout.size == problem.layout.size
    return problem.evaluate(pack_params(stage_params), per_observation=per_observation)


def stage_probabilities(
    params: ParamVector, z_row: np.ndarray, spec: ModelSpec | None = None
) -> np.ndarray:
    """Probability of ending in each of the J stages for one covariate row."""
    index = float(np.asarray(z_row, dtype=float) @ params.alpha)
    cuts = np.concatenate([[-np.inf], params.mu, [np.inf]])
    probs = np.exp(log_prob_between(cuts[:-1] - index, cuts[1:] - index))
    if spec is not None and probs.size != spec.n_stages:
        raise ConfigError("parameter cutoffs do not match the model specification")
    return np.asarray(probs)
