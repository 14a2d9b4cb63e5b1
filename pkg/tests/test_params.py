"""Tests for parameter packing and the reporting scale."""

import numpy as np
import pytest

from oheckman.errors import ConfigError
from oheckman.model import ModelSpec, ParamVector, RegimeParams
from oheckman.model.params import (
    ParamLayout,
    layout_of,
    pack_params,
    reported_values,
    reporting_jacobian,
    unpack_params,
)


def random_params(rng, n_alpha=3, n_stages=5, n_beta=2, n_regimes=2) -> ParamVector:
    mu = np.sort(rng.normal(size=n_stages - 1)) + np.arange(n_stages - 1) * 0.1
    regimes = tuple(
        RegimeParams(
            beta=rng.normal(size=n_beta),
            sigma=float(rng.uniform(0.3, 3.0)),
            rho=float(rng.uniform(-0.9, 0.9)),
        )
        for _ in range(n_regimes)
    )
    return ParamVector(alpha=rng.normal(size=n_alpha), mu=mu, regimes=regimes)


class TestPackParams:
    """Test the unconstrained encoding."""

    def test_zero_rho_packs_to_zero(self):
        params = ParamVector(
            alpha=[0.3], mu=[0.0], regimes=(RegimeParams(beta=[1.0], sigma=1.0, rho=0.0),)
        )
        packed = pack_params(params)
        assert packed[-1] == 0.0
        assert packed[-2] == 0.0

    def test_cutoffs_pack_to_first_and_log_increments(self):
        packed = pack_params(ParamVector(alpha=[], mu=[-1.0, 1.0]))
        assert packed == pytest.approx([-1.0, np.log(2.0)])

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            params = random_params(rng)
            spec = ModelSpec(n_stages=5, outcome_stages=(2, 4), exclusion_columns=(2,))
            back = unpack_params(pack_params(params), spec, n_alpha=3, n_beta=2)
            assert np.allclose(back.alpha, params.alpha, atol=1e-12)
            assert np.allclose(back.mu, params.mu, atol=1e-12)
            for ours, theirs in zip(back.regimes, params.regimes):
                assert np.allclose(ours.beta, theirs.beta, atol=1e-12)
                assert ours.sigma == pytest.approx(theirs.sigma, abs=1e-12)
                assert ours.rho == pytest.approx(theirs.rho, abs=1e-12)

    def test_any_finite_vector_unpacks_to_valid_params(self):
        rng = np.random.default_rng(4)
        layout = ParamLayout(n_alpha=2, n_stages=4, n_beta=2, n_regimes=1)
        for _ in range(20):
            params = unpack_params(
                rng.normal(scale=3.0, size=layout.size),
                ModelSpec(4, (3,), (1,)),
                n_alpha=2,
                n_beta=2,
            )
            assert np.all(np.diff(params.mu) > 0.0)
            assert params.regimes[0].sigma > 0.0
            assert abs(params.regimes[0].rho) < 1.0

    def test_non_finite_entries_rejected(self):
        spec = ModelSpec(2, (1,), (0,))
        with pytest.raises(ConfigError):
            unpack_params(np.array([0.0, np.nan, 1.0, 0.0, 0.0]), spec, n_alpha=1, n_beta=1)

    def test_wrong_length_rejected(self):
        spec = ModelSpec(2, (1,), (0,))
        with pytest.raises(ConfigError):
            unpack_params(np.zeros(3), spec, n_alpha=1, n_beta=1)


class TestParamValidation:
    """Test ParamVector and RegimeParams invariants."""

    def test_cutoffs_must_increase(self):
        with pytest.raises(ConfigError):
            ParamVector(alpha=[0.0], mu=[0.5, 0.5])

    def test_sigma_positive(self):
        with pytest.raises(ConfigError):
            RegimeParams(beta=[0.0], sigma=0.0, rho=0.0)

    def test_rho_inside_unit_interval(self):
        with pytest.raises(ConfigError):
            RegimeParams(beta=[0.0], sigma=1.0, rho=1.0)


class TestReportingScale:
    """Test reported values and their Jacobian."""

    def test_reported_values(self):
        rng = np.random.default_rng(5)
        params = random_params(rng)
        layout = layout_of(params)
        reported = reported_values(pack_params(params), layout)
        assert reported[layout.mu] == pytest.approx(params.mu)
        assert reported[layout.sigma(1)] == pytest.approx(params.regimes[1].sigma)
        assert reported[layout.rho(0)] == pytest.approx(params.regimes[0].rho)

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        params = random_params(rng)
        layout = layout_of(params)
        packed = pack_params(params)
        h = 1e-6
        numeric = np.empty((layout.size, layout.size))
        for j in range(layout.size):
            up, down = packed.copy(), packed.copy()
            up[j] += h
            down[j] -= h
            numeric[:, j] = (reported_values(up, layout) - reported_values(down, layout)) / (2 * h)
        assert np.allclose(reporting_jacobian(packed, layout), numeric, atol=1e-7)

    def test_labels(self):
        layout = ParamLayout(n_alpha=2, n_stages=3, n_beta=1, n_regimes=1)
        names = layout.names(["x1", "w"], ["const"], [2])
        assert names == [
            "alpha[x1]",
            "alpha[w]",
            "mu[1]",
            "mu[2]",
            "beta2[const]",
            "sigma2",
            "rho2",
        ]
