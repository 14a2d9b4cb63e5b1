"""Full-information maximum likelihood for the ordered-selection model."""

import logging
from dataclasses import dataclass

import numpy as np

from ..config import EstimatorType, get_settings
from ..errors import ConfigError, SingularMatrixError
from ..inference import (
    CovarianceRequest,
    DeltaTarget,
    covariance_label,
    delta_transform,
    two_sided_p_value,
    wald_test,
)
from ..model.likelihood import LikelihoodProblem
from ..model.params import pack_params, reported_values, unpack_with_layout
from ..model.types import Dataset, ModelSpec, ParamVector
from ..results import FitResult
from .base import Estimator
from .optimize import exclusion_test, fitted_covariance, maximize, predicted_stage_shares
from .twostep import fit_two_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FimlOptions:
    """Options of fit_ordered_heckman; unset values come from Settings.

    ``exp_beta`` names outcome columns whose exp(beta) - 1 is reported per
    regime with a delta-method standard error.
    """

    max_iter: int | None = None
    gradient_tol: float | None = None
    covariance: CovarianceRequest | None = None
    exp_beta: tuple[str, ...] = ()
    start: ParamVector | None = None


def _rho_tests(
    fit: FitResult, spec: ModelSpec, packed: np.ndarray, packed_cov: np.ndarray
) -> dict[str, float]:
    assert fit.layout is not None
    layout = fit.layout
    out: dict[str, float] = {}
    for r, s in enumerate(spec.outcome_stages):
        k = layout.rho(r)
        variance = packed_cov[k, k]
        se = float(np.sqrt(variance)) if np.isfinite(variance) and variance > 0 else float("nan")
        out[f"p_value_rho{s}"] = two_sided_p_value(float(packed[k]), se)
    if spec.n_regimes >= 2:
        restriction = np.zeros((spec.n_regimes, layout.size))
        for r in range(spec.n_regimes):
            restriction[r, layout.rho(r)] = 1.0
        joint = float("nan")
        if np.all(np.isfinite(packed_cov)):
            try:
                joint = wald_test(packed, packed_cov, restriction).p_value
            except SingularMatrixError:
                pass
        out["p_value_rho_joint"] = joint
    return out


def _exp_beta(
    fit: FitResult, data: Dataset, spec: ModelSpec, columns: tuple[str, ...]
) -> dict[str, float]:
    assert fit.layout is not None
    targets = []
    for name in columns:
        if name not in data.x_names:
            raise ConfigError(f"exp_beta column {name!r} is not an outcome column")
        k = data.x_names.index(name)
        for r, s in enumerate(spec.outcome_stages):
            index = fit.layout.beta(r).start + k
            targets.append(DeltaTarget(f"exp_beta_minus_1:beta{s}[{name}]", index, "expm1"))
    out: dict[str, float] = {}
    for key, value in delta_transform(fit, targets).items():
        out[key] = value.estimate
        out[f"{key}_se"] = value.std_error
    return out


def fit_ordered_heckman(
    data: Dataset, spec: ModelSpec, options: FimlOptions | None = None
) -> FitResult:
    """Jointly estimate the stage and outcome equations.

    Starts from the two-step values unless ``options.start`` is given.
    Non-convergence is reported through ``converged`` and ``flags`` with the
    best parameters found. The rho = 0 tests use the packed atanh scale.
    """
    options = options or FimlOptions()
    settings = get_settings()
    data.conform(spec)

    start = options.start
    if start is None:
        seed = fit_two_step(data, spec)
        assert seed.estimates is not None
        start = seed.estimates
    problem = LikelihoodProblem(data, spec.n_stages, spec)
    layout = problem.layout
    start_packed = pack_params(start)
    if start_packed.size != layout.size:
        raise ConfigError(
            f"start has {start_packed.size} packed entries, the model needs {layout.size}"
        )

    outcome = maximize(problem, start_packed, options.max_iter, options.gradient_tol)
    packed_cov, cov, flags, context = fitted_covariance(problem, outcome.x, options.covariance)
    estimates = unpack_with_layout(outcome.x, layout)

    if not outcome.converged:
        flags.append("not_converged")
        logger.warning(
            "fiml_not_converged iterations=%d gradient_norm=%.3e",
            outcome.n_iter,
            outcome.gradient_norm,
        )
    for s, regime in zip(spec.outcome_stages, estimates.regimes):
        if abs(regime.rho) > settings.boundary_rho:
            flags.append(f"boundary_rho{s}")
            logger.warning("fiml_boundary stage=%d rho=%.6f", s, regime.rho)

    fit = FitResult(
        estimator=EstimatorType.OHECKMAN.value,
        names=layout.names(data.z_names, data.x_names, spec.outcome_stages),
        params=reported_values(outcome.x, layout),
        covariance=cov,
        loglik=outcome.loglik,
        converged=outcome.converged,
        n_iter=outcome.n_iter,
        gradient_norm=outcome.gradient_norm,
        estimates=estimates,
        packed=outcome.x,
        packed_covariance=packed_cov,
        layout=layout,
        covariance_label=covariance_label(options.covariance),
        n_obs=data.n,
        n_outcome=int(data.observed.sum()),
        flags=flags,
        context=context,
    )
    fit.derived.update(_rho_tests(fit, spec, outcome.x, packed_cov))
    fit.derived.update(exclusion_test(outcome.x, packed_cov, layout, spec))
    fit.derived.update(_exp_beta(fit, data, spec, options.exp_beta))
    shares = predicted_stage_shares(estimates.alpha, estimates.mu, data.z_selection, data.weight)
    fit.derived.update({f"share[{j}]": float(p) for j, p in enumerate(shares)})
    logger.info(
        "fiml_done converged=%s iterations=%d loglik=%.4f",
        outcome.converged,
        outcome.n_iter,
        outcome.loglik,
    )
    return fit


def binarize_stages(data: Dataset, spec: ModelSpec) -> tuple[Dataset, ModelSpec]:
    """Collapse the stages to 1{stage == outcome stage} for a single regime."""
    if spec.n_regimes != 1:
        raise ConfigError("binarized stages need exactly one outcome stage")
    data.conform(spec)
    selected = (data.stage == spec.outcome_stages[0]).astype(int)
    return (
        data.replace(stage=selected),
        ModelSpec(n_stages=2, outcome_stages=(1,), exclusion_columns=spec.exclusion_columns),
    )


class OrderedHeckmanEstimator(Estimator):
    estimator_type = EstimatorType.OHECKMAN

    def __init__(self, options: FimlOptions | None = None):
        self.options = options or FimlOptions()

    def fit(self, data: Dataset, spec: ModelSpec) -> FitResult:
        return fit_ordered_heckman(data, spec, self.options)


class BinaryHeckmanEstimator(Estimator):
    """Ordered Heckman on the binarized selection stage."""

    estimator_type = EstimatorType.HECKMAN2

    def __init__(self, options: FimlOptions | None = None):
        self.options = options or FimlOptions()

    def fit(self, data: Dataset, spec: ModelSpec) -> FitResult:
        binary_data, binary_spec = binarize_stages(data, spec)
        result = fit_ordered_heckman(binary_data, binary_spec, self.options)
        result.estimator = self.estimator_type.value
        return result
