"""Abstract base class for estimators and shared helpers."""

from abc import ABC, abstractmethod
from collections.abc import Sequence

import numpy as np
from scipy import linalg

from ..config import EstimatorType, get_settings
from ..errors import RankDeficiencyError
from ..model.types import Dataset, ModelSpec
from ..results import FitResult, QuantileFit


class Estimator(ABC):
    """Fits one model family to a dataset."""

    estimator_type: EstimatorType

    @abstractmethod
    def fit(self, data: Dataset, spec: ModelSpec) -> FitResult | QuantileFit:
        """Fit the model and return its result."""
        pass

    @property
    def name(self) -> str:
        return self.estimator_type.value


def require_full_rank(x: np.ndarray, names: Sequence[str] | None = None) -> None:
    """Raise RankDeficiencyError naming the columns a pivoted QR finds redundant."""
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    labels = list(names) if names else [f"x{k}" for k in range(p)]
    if p == 0:
        return
    if n < p:
        raise RankDeficiencyError(f"{n} rows cannot identify {p} coefficients", labels)
    _, r, pivot = linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = get_settings().collinearity_tol * max(float(diag[0]) if diag.size else 0.0, 1e-300)
    rank = int(np.sum(diag > tol))
    if rank < p:
        raise RankDeficiencyError(
            "design matrix is rank deficient", [labels[k] for k in sorted(pivot[rank:])]
        )


def observed_rows(data: Dataset, stage: int | None = None) -> np.ndarray:
    """Indices of observations with an outcome, optionally at one stage."""
    mask = data.observed
    if stage is not None:
        mask = mask & (data.stage == stage)
    return np.flatnonzero(mask)
