"""Monte Carlo data-generating process with four ordered stages.

Two equal groups differ by a 0/1 indicator. The latent index is
alpha1 * group + alpha2 * severity + alpha3 * z + xi; stages are cut at the
empirical percentiles of the index so stage counts are exact. The outcome
ln(40) + 0.1 * group + severity + eps, with corr(xi, eps) = rho, is observed
in the top stage only.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..model.types import INTERCEPT, Dataset, ModelSpec

STUDY_I_PROPORTIONS = (0.4, 0.1, 0.1, 0.4)
STUDY_II_PROPORTIONS = (0.20, 0.05, 0.05, 0.70)
DEFAULT_BETA = (math.log(40.0), 0.1, 1.0)

X_NAMES = (INTERCEPT, "black", "severity")
Z_NAMES = ("black", "severity", "z")
TOP_STAGE = 3
GROUP_COLUMN = 1


@dataclass(frozen=True)
class DgpConfig:
    rho: float
    alpha1: float
    n_per_group: int = 1000
    alpha2: float = 1.0
    alpha3: float = 1.0
    beta: tuple[float, float, float] = DEFAULT_BETA
    stage_proportions: tuple[float, ...] = STUDY_I_PROPORTIONS
    seed: int = 0

    def __post_init__(self) -> None:
        props = np.asarray(self.stage_proportions, dtype=float)
        if props.size != 4 or np.any(props <= 0.0) or abs(props.sum() - 1.0) > 1e-9:
            raise ConfigError(f"stage proportions must be 4 positive shares summing to 1: {props}")
        if not abs(self.rho) <= 1.0:
            raise ConfigError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.n_per_group < 1:
            raise ConfigError("n_per_group must be positive")

    @property
    def n(self) -> int:
        return 2 * self.n_per_group


def dgp_spec() -> ModelSpec:
    """Four stages, outcome in the top stage, z excluded from the outcome."""
    return ModelSpec(n_stages=4, outcome_stages=(TOP_STAGE,), exclusion_columns=(2,))


def stage_counts(n: int, proportions: tuple[float, ...]) -> np.ndarray:
    """Integer counts closest to n * p that sum to n (largest remainders)."""
    raw = n * np.asarray(proportions, dtype=float)
    counts = np.floor(raw + 1e-9).astype(int)
    short = n - int(counts.sum())
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def draw_errors(rho: float, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Standard bivariate normal (xi, eps) with correlation rho."""
    xi = rng.standard_normal(n)
    eta = rng.standard_normal(n)
    return xi, rho * xi + math.sqrt(max(1.0 - rho * rho, 0.0)) * eta


def assign_stages(latent: np.ndarray, proportions: tuple[float, ...]) -> np.ndarray:
    """Stage codes from percentile cutoffs of ``latent``; ties by index order."""
    counts = stage_counts(latent.size, proportions)
    order = np.argsort(latent, kind="stable")
    stage = np.empty(latent.size, dtype=int)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    for j in range(counts.size):
        stage[order[bounds[j] : bounds[j + 1]]] = j
    return stage


def simulate_dgp(config: DgpConfig, rng: np.random.Generator | None = None) -> Dataset:
    """One simulated sample; ``rng`` overrides the stream seeded by config.seed."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n = config.n
    black = np.repeat([0.0, 1.0], config.n_per_group)
    severity = rng.standard_normal(n)
    z = rng.standard_normal(n)
    xi, eps = draw_errors(config.rho, n, rng)

    latent = config.alpha1 * black + config.alpha2 * severity + config.alpha3 * z + xi
    stage = assign_stages(latent, config.stage_proportions)
    b0, b1, b2 = config.beta
    y = b0 + b1 * black + b2 * severity + eps

    return Dataset.create(
        dgp_spec(),
        stage=stage,
        outcome=np.where(stage == TOP_STAGE, y, np.nan),
        x_outcome=np.column_stack([np.ones(n), black, severity]),
        z_selection=np.column_stack([black, severity, z]),
        x_names=X_NAMES,
        z_names=Z_NAMES,
    )
