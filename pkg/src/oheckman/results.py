"""Result containers shared by estimators, inference and the CLI."""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .model.params import ParamLayout
from .model.types import ParamVector


@dataclass(frozen=True)
class ScoreContext:
    """What covariance estimation needs from a fitted likelihood.

    ``gradient`` returns the total weighted gradient of the objective and
    ``weighted_scores`` the n x K matrix of weighted per-observation scores,
    both on the scale of ``estimate``.
    """

    estimate: np.ndarray
    gradient: Callable[[np.ndarray], np.ndarray]
    weighted_scores: Callable[[np.ndarray], np.ndarray]
    cluster_id: np.ndarray
    hessian: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass
class FitResult:
    """Estimates with covariance on the reported scale.

    ``packed``/``packed_covariance`` hold the optimizer-scale estimate when the
    fit was run on transformed parameters (ordered probit, FIML).
    """

    estimator: str
    names: list[str]
    params: np.ndarray
    covariance: np.ndarray
    loglik: float | None = None
    converged: bool = True
    n_iter: int = 0
    gradient_norm: float = 0.0
    derived: dict[str, float] = field(default_factory=dict)
    estimates: ParamVector | None = None
    packed: np.ndarray | None = None
    packed_covariance: np.ndarray | None = None
    layout: ParamLayout | None = None
    covariance_label: str = "observed_information"
    n_obs: int = 0
    n_outcome: int = 0
    flags: list[str] = field(default_factory=list)
    context: ScoreContext | None = field(default=None, repr=False)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no parameter named {name!r}") from None

    def coef(self, name: str) -> float:
        return float(self.params[self.index(name)])

    def std_error(self, name: str) -> float:
        return float(self.std_errors[self.index(name)])


@dataclass
class QuantileFit:
    """Linear quantile regression at level ``tau``."""

    tau: float
    coefficients: np.ndarray
    objective: float
    names: list[str] = field(default_factory=list)
    n_obs: int = 0
    n_imputed: int = 0
    n_crossing: int = 0
    imputed_value: float | None = None

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])
