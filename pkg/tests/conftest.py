"""Shared fixtures: synthetic ordered-selection samples and settings reset."""

import math

import numpy as np
import pytest

import oheckman.config as config_module
from oheckman.model import Dataset, ModelSpec


@pytest.fixture(autouse=True)
def reset_settings():
    """Each test starts from default settings."""
    config_module._settings = None
    yield
    config_module._settings = None


def simulate_sample(
    n: int = 2000,
    rho: float = 0.4,
    mu: tuple[float, ...] = (-0.8, 0.0, 0.6),
    outcome_stages: tuple[int, ...] = (3,),
    alpha: tuple[float, float] = (0.5, 1.0),
    beta: tuple[float, float] = (1.0, 0.5),
    sigma: float = 1.5,
    seed: int = 0,
    clusters: int | None = None,
) -> tuple[Dataset, ModelSpec]:
    """Ordered-selection sample with x = [const, x1] and z = [x1, w].

    ``w`` is the excluded instrument. Every regime shares ``beta`` and
    ``sigma``; regime r draws its own error with correlation ``rho``.
    """
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(n)
    w = rng.standard_normal(n)
    xi = rng.standard_normal(n)
    latent = alpha[0] * x1 + alpha[1] * w + xi
    stage = np.searchsorted(np.asarray(mu), latent)
    eps = rho * xi + math.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
    y = beta[0] + beta[1] * x1 + sigma * eps
    spec = ModelSpec(n_stages=len(mu) + 1, outcome_stages=outcome_stages, exclusion_columns=(1,))
    cluster_id = None if clusters is None else rng.integers(0, clusters, size=n)
    data = Dataset.create(
        spec,
        stage=stage,
        outcome=np.where(np.isin(stage, outcome_stages), y, np.nan),
        x_outcome=np.column_stack([np.ones(n), x1]),
        z_selection=np.column_stack([x1, w]),
        cluster_id=cluster_id,
        x_names=("const", "x1"),
        z_names=("x1", "w"),
    )
    return data, spec


@pytest.fixture
def sample():
    """Four stages, outcome in the top stage, rho = 0.4."""
    return simulate_sample()


@pytest.fixture(scope="session")
def sample_factory():
    return simulate_sample
