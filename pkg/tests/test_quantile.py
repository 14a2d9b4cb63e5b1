"""Tests for quantile regression and the imputation estimator."""

import numpy as np
import pytest

from oheckman.errors import ConfigError, DataError
from oheckman.estimators import ImputationEstimator, fit_imputation, fit_quantile
from oheckman.estimators.quantile import check_loss
from oheckman.model import Dataset, ModelSpec

SPEC = ModelSpec(2, (1,), (1,))


def censored_sample(n=400, missing=0.2, seed=0):
    """y = 10 + g + noise, with a share of outcomes left unobserved."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(n)
    w = rng.standard_normal(n)
    y = 10.0 + g + rng.standard_normal(n)
    stage = (rng.uniform(size=n) >= missing).astype(int)
    return Dataset.create(
        SPEC,
        stage=stage,
        outcome=np.where(stage == 1, y, np.nan),
        x_outcome=np.column_stack([np.ones(n), g]),
        z_selection=np.column_stack([g, w]),
        x_names=("const", "g"),
        z_names=("g", "w"),
    )


class TestFitQuantile:
    """Test the check-loss linear program."""

    def test_median_of_three(self):
        fit = fit_quantile(np.array([1.0, 2.0, 9.0]), np.ones((3, 1)), 0.5)
        assert fit.coefficients[0] == pytest.approx(2.0, abs=1e-9)

    def test_upper_decile(self):
        y = np.arange(1.0, 101.0)
        fit = fit_quantile(y, np.ones((100, 1)), 0.9)
        assert 90.0 - 1e-9 <= fit.coefficients[0] <= 91.0 + 1e-9

    def test_no_perturbation_improves(self):
        rng = np.random.default_rng(1)
        x = np.column_stack([np.ones(120), rng.normal(size=120)])
        y = x @ [1.0, 2.0] + rng.standard_t(3, size=120)
        fit = fit_quantile(y, x, 0.3)
        assert fit.objective == pytest.approx(check_loss(y - x @ fit.coefficients, 0.3))
        for _ in range(20):
            moved = fit.coefficients + rng.normal(scale=0.05, size=2)
            assert check_loss(y - x @ moved, 0.3) >= fit.objective - 1e-9

    @pytest.mark.parametrize("tau", [0.1, 0.5, 0.75])
    def test_share_below_fit(self, tau):
        """With an intercept the share of negative residuals brackets tau."""
        rng = np.random.default_rng(2)
        n = 300
        x = np.column_stack([np.ones(n), rng.normal(size=n)])
        y = x @ [0.5, -1.0] + rng.normal(size=n)
        fit = fit_quantile(y, x, tau)
        resid = y - x @ fit.coefficients
        below = np.mean(resid < -1e-9)
        at_or_below = np.mean(resid <= 1e-9)
        assert below <= tau + 1e-9
        assert at_or_below >= tau - 1e-9
        assert below >= tau - x.shape[1] / n

    def test_all_equal_outcome(self):
        rng = np.random.default_rng(3)
        x = np.column_stack([np.ones(10), rng.normal(size=10)])
        fit = fit_quantile(np.full(10, 4.0), x, 0.25, names=["const", "g"])
        assert fit.coefficients == pytest.approx([4.0, 0.0])
        assert fit.objective == 0.0
        assert fit.coef("const") == 4.0

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.5, 1.2])
    def test_tau_outside_unit_interval(self, tau):
        with pytest.raises(ConfigError):
            fit_quantile(np.arange(3.0), np.ones((3, 1)), tau)

    def test_scaling_column_rescales_coefficient(self):
        rng = np.random.default_rng(6)
        x = np.column_stack([np.ones(150), rng.normal(size=150)])
        y = x @ [1.0, 2.0] + rng.normal(size=150)
        base = fit_quantile(y, x, 0.5)
        scaled = fit_quantile(y, x * [1.0, 4.0], 0.5)
        assert scaled.coefficients[1] == pytest.approx(base.coefficients[1] / 4.0, rel=1e-6)
        assert scaled.coefficients[0] == pytest.approx(base.coefficients[0], rel=1e-6)
        assert scaled.objective == pytest.approx(base.objective, rel=1e-7)

    def test_weights_act_as_replication(self):
        y = np.array([1.0, 2.0, 9.0])
        weighted = fit_quantile(y, np.ones((3, 1)), 0.5, weights=np.array([1.0, 1.0, 5.0]))
        repeated = fit_quantile(np.array([1.0, 2.0] + [9.0] * 5), np.ones((7, 1)), 0.5)
        assert weighted.coefficients == pytest.approx(repeated.coefficients)


class TestImputation:
    """Test quantile regression on low-imputed outcomes."""

    def test_without_missing_outcomes_is_plain_quantile(self):
        data = censored_sample(missing=0.0)
        fit = fit_imputation(data, SPEC, 0.5)
        direct = fit_quantile(data.outcome, data.x_outcome, 0.5)
        assert fit.coefficients == pytest.approx(direct.coefficients, abs=1e-10)
        assert fit.n_imputed == 0
        assert fit.n_crossing == 0

    def test_default_value_is_observed_minimum(self):
        data = censored_sample()
        fit = fit_imputation(data, SPEC, 0.5)
        assert fit.imputed_value == np.nanmin(data.outcome)
        assert fit.n_imputed == int((~data.observed).sum())
        assert fit.names == ["const", "g"]

    def test_lower_imputed_value_changes_nothing(self):
        """Imputed rows already below the fit stay below when pushed further down."""
        data = censored_sample(seed=4)
        base = fit_imputation(data, SPEC, 0.5, imputed_value=0.0)
        lower = fit_imputation(data, SPEC, 0.5, imputed_value=-10.0)
        assert base.n_crossing == 0
        assert lower.coefficients == pytest.approx(base.coefficients, abs=1e-8)

    def test_median_slope_near_truth(self):
        data = censored_sample(n=2000, missing=0.1, seed=5)
        fit = ImputationEstimator(tau=0.5).fit(data, SPEC)
        assert fit.coef("g") == pytest.approx(1.0, abs=0.2)

    def test_needs_an_observed_outcome(self):
        data = Dataset.create(
            ModelSpec(2, (1,), (0,)),
            stage=[0, 0],
            outcome=[np.nan, np.nan],
            x_outcome=[[1.0], [1.0]],
            z_selection=[[0.1], [0.2]],
        )
        with pytest.raises(DataError):
            fit_imputation(data, ModelSpec(2, (1,), (0,)), 0.5)
