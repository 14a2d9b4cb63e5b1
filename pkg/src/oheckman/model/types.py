"""Domain types of the ordered-selection model."""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError

INTERCEPT = "const"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class ModelSpec:
    """Stage layout and outcome regimes.

    Regime r is the outcome equation attached to stage ``outcome_stages[r]``.
    """

    n_stages: int
    outcome_stages: tuple[int, ...]
    exclusion_columns: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "outcome_stages", tuple(int(s) for s in self.outcome_stages))
        object.__setattr__(
            self, "exclusion_columns", tuple(int(c) for c in self.exclusion_columns)
        )
        if self.n_stages < 2:
            raise ConfigError(f"n_stages must be at least 2, got {self.n_stages}")
        if not self.outcome_stages:
            raise ConfigError("outcome_stages must name at least one stage")
        if len(set(self.outcome_stages)) != len(self.outcome_stages):
            raise ConfigError(f"duplicate outcome stages: {self.outcome_stages}")
        if list(self.outcome_stages) != sorted(self.outcome_stages):
            raise ConfigError(f"outcome_stages must be ordered: {self.outcome_stages}")
        bad = [s for s in self.outcome_stages if not 0 <= s < self.n_stages]
        if bad:
            raise ConfigError(f"outcome stages {bad} outside 0..{self.n_stages - 1}")
        if not self.exclusion_columns:
            raise ConfigError("exclusion_columns must name at least one selection column")

    @property
    def n_regimes(self) -> int:
        return len(self.outcome_stages)

    def regime_of(self, stage: int) -> int | None:
        """Regime index carried by a stage, or None."""
        try:
            return self.outcome_stages.index(int(stage))
        except ValueError:
            return None

    def regime_index(self, stages: np.ndarray) -> np.ndarray:
        """Per-observation regime index, -1 for stages without an outcome."""
        lookup = np.full(self.n_stages, -1, dtype=int)
        for r, s in enumerate(self.outcome_stages):
            lookup[s] = r
        return lookup[np.asarray(stages, dtype=int)]


@dataclass(frozen=True)
class Dataset:
    """Aligned observation arrays.

    ``outcome`` is NaN wherever it is not observed. ``cluster_id`` defaults
    to one cluster per observation and ``weight`` to ones.
    """

    stage: np.ndarray
    outcome: np.ndarray
    x_outcome: np.ndarray
    z_selection: np.ndarray
    cluster_id: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    weight: np.ndarray = field(default_factory=lambda: np.empty(0))
    x_names: tuple[str, ...] = ()
    z_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        stage = np.asarray(self.stage)
        if stage.ndim != 1:
            raise DataError("stage must be one-dimensional")
        n = stage.shape[0]
        if np.issubdtype(stage.dtype, np.floating):
            if np.any(~np.isfinite(stage)) or np.any(stage != np.round(stage)):
                raise DataError("stage codes must be integers")
        stage = stage.astype(int)
        if np.any(stage < 0):
            raise DataError("stage codes must be non-negative")

        outcome = np.asarray(self.outcome, dtype=float).reshape(-1)
        x = np.atleast_2d(np.asarray(self.x_outcome, dtype=float))
        z = np.atleast_2d(np.asarray(self.z_selection, dtype=float))
        if x.shape[0] != n and x.shape == (1, n):
            x = x.T
        if z.shape[0] != n and z.shape == (1, n):
            z = z.T
        for name, arr in (("outcome", outcome), ("x_outcome", x), ("z_selection", z)):
            if arr.shape[0] != n:
                raise DataError(f"{name} has {arr.shape[0]} rows, expected {n}")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(z)):
            raise DataError("design matrices must be finite")

        cluster = np.asarray(self.cluster_id)
        cluster = np.arange(n) if cluster.size == 0 else cluster.reshape(-1)
        weight = np.asarray(self.weight, dtype=float).reshape(-1)
        weight = np.ones(n) if weight.size == 0 else weight
        if cluster.shape[0] != n or weight.shape[0] != n:
            raise DataError("cluster_id and weight must have one entry per observation")
        if not np.all(np.isfinite(weight)) or np.any(weight <= 0.0):
            raise DataError("weights must be strictly positive")

        x_names = tuple(self.x_names) or tuple(f"x{k}" for k in range(x.shape[1]))
        z_names = tuple(self.z_names) or tuple(f"z{k}" for k in range(z.shape[1]))
        if len(x_names) != x.shape[1] or len(z_names) != z.shape[1]:
            raise DataError("column name count does not match the design matrices")

        object.__setattr__(self, "stage", _frozen(stage))
        object.__setattr__(self, "outcome", _frozen(outcome))
        object.__setattr__(self, "x_outcome", _frozen(x))
        object.__setattr__(self, "z_selection", _frozen(z))
        object.__setattr__(self, "cluster_id", _frozen(cluster))
        object.__setattr__(self, "weight", _frozen(weight))
        object.__setattr__(self, "x_names", x_names)
        object.__setattr__(self, "z_names", z_names)

    @classmethod
    def create(
        cls,
        spec: ModelSpec,
        stage: Sequence[int] | np.ndarray,
        outcome: Sequence[float] | np.ndarray,
        x_outcome: np.ndarray,
        z_selection: np.ndarray,
        cluster_id: np.ndarray | None = None,
        weight: np.ndarray | None = None,
        x_names: Sequence[str] = (),
        z_names: Sequence[str] = (),
    ) -> "Dataset":
        """Build a dataset and check it against a model specification."""
        data = cls(
            stage=np.asarray(stage),
            outcome=np.asarray(outcome, dtype=float),
            x_outcome=np.asarray(x_outcome, dtype=float),
            z_selection=np.asarray(z_selection, dtype=float),
            cluster_id=np.empty(0, dtype=int) if cluster_id is None else np.asarray(cluster_id),
            weight=np.empty(0) if weight is None else np.asarray(weight, dtype=float),
            x_names=tuple(x_names),
            z_names=tuple(z_names),
        )
        data.conform(spec)
        return data

    @property
    def n(self) -> int:
        return int(self.stage.shape[0])

    @property
    def observed(self) -> np.ndarray:
        return np.asarray(~np.isnan(self.outcome))

    def conform(self, spec: ModelSpec) -> None:
        """Check the observability and identification rules of ``spec``.

        Raises:
            DataError: if stage codes, outcome presence or column roles disagree
        """
        if np.any(self.stage >= spec.n_stages):
            raise DataError(f"stage codes must lie in 0..{spec.n_stages - 1}")
        carries = spec.regime_index(self.stage) >= 0
        missing = np.flatnonzero(carries & ~self.observed)
        if missing.size:
            raise DataError(
                f"outcome missing at an outcome stage for {missing.size} observations "
                f"(first index {missing[0]})"
            )
        extra = np.flatnonzero(~carries & self.observed)
        if extra.size:
            raise DataError(
                f"outcome present at a non-outcome stage for {extra.size} observations "
                f"(first index {extra[0]})"
            )
        q = self.z_selection.shape[1]
        bad = [c for c in spec.exclusion_columns if not 0 <= c < q]
        if bad:
            raise DataError(f"exclusion columns {bad} outside the {q} selection columns")

        shared = self._shared_columns()
        for k, match in enumerate(shared):
            if match is None:
                raise DataError(
                    f"outcome column {self.x_names[k]!r} is not among the selection columns"
                )
        used = {m for m in shared if m is not None and m >= 0}
        overlap = sorted(used.intersection(spec.exclusion_columns))
        if overlap:
            names = [self.z_names[c] for c in overlap]
            raise DataError(f"exclusion columns also enter the outcome equation: {names}")

    def _shared_columns(self) -> list[int | None]:
        """Map each outcome column to its selection column; -1 for constants."""
        result: list[int | None] = []
        for k in range(self.x_outcome.shape[1]):
            col = self.x_outcome[:, k]
            if self.n == 0 or np.all(col == col[0]):
                # cutoffs absorb the intercept of the selection index
                result.append(-1)
                continue
            match = None
            for j in range(self.z_selection.shape[1]):
                if np.array_equal(col, self.z_selection[:, j]):
                    match = j
                    break
            result.append(match)
        return result

    def subset(self, rows: np.ndarray) -> "Dataset":
        """Rows selected by a boolean mask or index array."""
        return Dataset(
            stage=self.stage[rows],
            outcome=self.outcome[rows],
            x_outcome=self.x_outcome[rows],
            z_selection=self.z_selection[rows],
            cluster_id=self.cluster_id[rows],
            weight=self.weight[rows],
            x_names=self.x_names,
            z_names=self.z_names,
        )

    def replace(self, **changes: object) -> "Dataset":
        fields = {
            "stage": self.stage,
            "outcome": self.outcome,
            "x_outcome": self.x_outcome,
            "z_selection": self.z_selection,
            "cluster_id": self.cluster_id,
            "weight": self.weight,
            "x_names": self.x_names,
            "z_names": self.z_names,
        }
        fields.update(changes)
        return Dataset(**fields)  # type: ignore[arg-type]


@dataclass(frozen=True)
class RegimeParams:
    """Outcome equation of one regime."""

    beta: np.ndarray
    sigma: float
    rho: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", _frozen(np.asarray(self.beta, dtype=float).reshape(-1)))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "rho", float(self.rho))
        if not self.sigma > 0.0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not abs(self.rho) < 1.0:
            raise ConfigError(f"rho must lie in (-1, 1), got {self.rho}")


@dataclass(frozen=True)
class ParamVector:
    """Selection coefficients, cutoffs and one RegimeParams per outcome regime."""

    alpha: np.ndarray
    mu: np.ndarray
    regimes: tuple[RegimeParams, ...] = ()

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if mu.size < 1:
            raise ConfigError("at least one cutoff is required")
        if not np.all(np.isfinite(alpha)) or not np.all(np.isfinite(mu)):
            raise ConfigError("alpha and mu must be finite")
        if np.any(np.diff(mu) <= 0.0):
            raise ConfigError(f"cutoffs must be strictly increasing, got {mu}")
        object.__setattr__(self, "alpha", _frozen(alpha))
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "regimes", tuple(self.regimes))

    @property
    def n_stages(self) -> int:
        return int(self.mu.size + 1)


@dataclass(frozen=True)
class LoglikReport:
    """Value and packed-scale gradient of the weighted log-likelihood.

    ``per_observation`` holds unweighted log-contributions and ``scores`` the
    unweighted per-observation packed gradients, when requested. ``flagged``
    lists observations whose likelihood hit the log floor.
    """

    value: float
    gradient: np.ndarray
    per_observation: np.ndarray | None = None
    scores: np.ndarray | None = None
    flagged: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
