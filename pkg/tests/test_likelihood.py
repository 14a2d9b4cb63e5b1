"""Tests for the ordered-selection likelihood."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from oheckman.errors import ConfigError
from oheckman.model import (
    Dataset,
    LikelihoodProblem,
    ModelSpec,
    ParamVector,
    RegimeParams,
    ordsel_loglik,
    stage_loglik,
    stage_probabilities,
)
from oheckman.model.params import pack_params


def single(stage, outcome, x_row, z_row, spec):
    return Dataset.create(
        spec,
        stage=[stage],
        outcome=[outcome],
        x_outcome=np.atleast_2d(x_row),
        z_selection=np.atleast_2d(z_row),
    )


def draw_problem(rng, n_stages, outcome_stages, n=30):
    """Random parameters and a small dataset simulated from them."""
    q = 3
    alpha = rng.normal(scale=0.5, size=q)
    mu = np.sort(rng.normal(scale=1.0, size=n_stages - 1)) + 0.2 * np.arange(n_stages - 1)
    regimes = tuple(
        RegimeParams(
            beta=rng.normal(size=2),
            sigma=float(rng.uniform(0.5, 2.0)),
            rho=float(rng.uniform(-0.8, 0.8)),
        )
        for _ in outcome_stages
    )
    params = ParamVector(alpha=alpha, mu=mu, regimes=regimes)
    spec = ModelSpec(n_stages, outcome_stages, exclusion_columns=(1, 2))

    z = rng.normal(size=(n, q))
    xi = rng.standard_normal(n)
    stage = np.searchsorted(mu, z @ alpha + xi)
    x = np.column_stack([np.ones(n), z[:, 0]])
    y = np.full(n, np.nan)
    for regime, s in zip(regimes, outcome_stages):
        rows = stage == s
        eps = regime.rho * xi + math.sqrt(1 - regime.rho**2) * rng.standard_normal(n)
        y[rows] = (x @ regime.beta + regime.sigma * eps)[rows]
    data = Dataset.create(
        spec,
        stage=stage,
        outcome=y,
        x_outcome=x,
        z_selection=z,
        weight=rng.uniform(0.5, 2.0, size=n),
    )
    return params, data, spec


class TestStageTerms:
    """Test the ordered-probit part of the likelihood."""

    def test_two_stage_symmetric(self):
        data = Dataset(stage=[0], outcome=[np.nan], x_outcome=[[1.0]], z_selection=[[0.0]])
        report = stage_loglik(ParamVector(alpha=[0.0], mu=[0.0]), data)
        assert report.value == pytest.approx(math.log(0.5), abs=1e-14)

    def test_interior_stage(self):
        data = Dataset(stage=[1], outcome=[np.nan], x_outcome=[[1.0]], z_selection=[[0.0]])
        report = stage_loglik(ParamVector(alpha=[0.0], mu=[-1.0, 0.0, 1.0]), data)
        expected = math.log(stats.norm.cdf(0.0) - stats.norm.cdf(-1.0))
        assert report.value == pytest.approx(expected, abs=1e-12)
        assert math.exp(report.value) == pytest.approx(0.341345, abs=1e-6)

    def test_stage_likelihoods_sum_to_one(self):
        params = ParamVector(alpha=[0.7, -0.2], mu=[-0.5, 0.3, 1.1])
        z_row = [0.4, 1.5]
        total = 0.0
        for stage in range(4):
            data = Dataset(
                stage=[stage], outcome=[np.nan], x_outcome=[[1.0]], z_selection=[z_row]
            )
            total += math.exp(stage_loglik(params, data).value)
        assert total == pytest.approx(1.0, abs=1e-12)
        assert stage_probabilities(params, z_row).sum() == pytest.approx(1.0, abs=1e-12)


class TestStageProbabilities:
    """Test predicted stage probabilities."""

    def test_symmetric_cutoffs(self):
        probs = stage_probabilities(ParamVector(alpha=[0.0], mu=[-1.0, 0.0, 1.0]), [0.0])
        assert probs == pytest.approx([0.158655, 0.341345, 0.341345, 0.158655], abs=1e-6)

    def test_far_left_cutoffs(self):
        probs = stage_probabilities(ParamVector(alpha=[0.0], mu=[-10.0, -9.0, -8.0]), [0.0])
        assert probs[-1] == pytest.approx(1.0, abs=1e-12)

    def test_location_invariance(self):
        mu = np.array([-1.0, 0.2, 0.9])
        base = stage_probabilities(ParamVector(alpha=[1.0], mu=mu), [0.0])
        shifted = stage_probabilities(ParamVector(alpha=[1.0], mu=mu + 2.5), [2.5])
        assert shifted == pytest.approx(base, abs=1e-12)

    def test_spec_mismatch(self):
        with pytest.raises(ConfigError):
            stage_probabilities(
                ParamVector(alpha=[0.0], mu=[0.0]), [0.0], ModelSpec(3, (2,), (0,))
            )


class TestOutcomeTerms:
    """Test outcome-stage contributions against independent oracles."""

    def test_matches_quadrature(self):
        """Top-stage contribution equals the integral of the bivariate normal density."""
        spec = ModelSpec(4, (3,), (0,))
        mu3, m, xb, sigma, rho, y = 0.5, 0.2, 1.0, 2.0, 0.6, 2.0
        params = ParamVector(
            alpha=[m],
            mu=[-1.0, 0.0, mu3],
            regimes=(RegimeParams(beta=[xb], sigma=sigma, rho=rho),),
        )
        data = single(3, y, [1.0], [1.0], spec)
        e = (y - xb) / sigma
        joint = stats.multivariate_normal(mean=[0.0, 0.0], cov=[[1.0, rho], [rho, 1.0]])
        integral, _ = integrate.quad(
            lambda xi: joint.pdf([xi, e]), mu3 - m, np.inf, epsabs=1e-14, epsrel=1e-12
        )
        expected = math.log(integral / sigma)
        assert ordsel_loglik(params, data, spec).value == pytest.approx(expected, abs=1e-7)

    def test_interior_regime_matches_quadrature(self):
        spec = ModelSpec(4, (2,), (0,))
        params = ParamVector(
            alpha=[0.3],
            mu=[-1.0, 0.1, 0.8],
            regimes=(RegimeParams(beta=[0.5], sigma=1.3, rho=-0.4),),
        )
        data = single(2, 1.1, [1.0], [1.0], spec)
        e = (1.1 - 0.5) / 1.3
        joint = stats.multivariate_normal(mean=[0.0, 0.0], cov=[[1.0, -0.4], [-0.4, 1.0]])
        integral, _ = integrate.quad(
            lambda xi: joint.pdf([xi, e]), 0.1 - 0.3, 0.8 - 0.3, epsabs=1e-14, epsrel=1e-12
        )
        expected = math.log(integral / 1.3)
        assert ordsel_loglik(params, data, spec).value == pytest.approx(expected, abs=1e-7)

    def test_factorizes_at_zero_rho(self, sample):
        data, spec = sample
        params = ParamVector(
            alpha=[0.4, 0.9],
            mu=[-0.7, 0.1, 0.5],
            regimes=(RegimeParams(beta=[1.1, 0.4], sigma=1.4, rho=0.0),),
        )
        joint = ordsel_loglik(params, data, spec).value
        stages = stage_loglik(params, data).value
        rows = data.observed
        e = (data.outcome[rows] - data.x_outcome[rows] @ params.regimes[0].beta) / 1.4
        outcome = float(np.sum(data.weight[rows] * (stats.norm.logpdf(e) - math.log(1.4))))
        assert joint == pytest.approx(stages + outcome, abs=1e-8)

    def test_reduces_to_binary_heckman(self):
        """J = 2 with an outcome in stage 1 is the classical selection likelihood."""
        rng = np.random.default_rng(12)
        n = 20
        z = np.column_stack([rng.normal(size=n), rng.normal(size=n)])
        x = np.column_stack([np.ones(n), z[:, 0]])
        gamma, cut = np.array([0.6, -0.8]), 0.2
        beta, sigma, rho = np.array([0.5, 1.2]), 0.8, 0.45
        selected = z @ gamma + rng.standard_normal(n) > cut
        y = np.where(selected, x @ beta + sigma * rng.standard_normal(n), np.nan)
        spec = ModelSpec(2, (1,), (1,))
        data = Dataset.create(
            spec, stage=selected.astype(int), outcome=y, x_outcome=x, z_selection=z
        )
        params = ParamVector(
            alpha=gamma, mu=[cut], regimes=(RegimeParams(beta=beta, sigma=sigma, rho=rho),)
        )

        index = z @ gamma - cut
        e = (y - x @ beta) / sigma
        oracle = np.where(
            selected,
            stats.norm.logpdf(e)
            - math.log(sigma)
            + stats.norm.logcdf((index + rho * e) / math.sqrt(1 - rho**2)),
            stats.norm.logcdf(-index),
        )
        assert ordsel_loglik(params, data, spec).value == pytest.approx(oracle.sum(), abs=1e-10)

    def test_weights_scale_contributions(self, sample):
        data, spec = sample
        params = ParamVector(
            alpha=[0.4, 0.9],
            mu=[-0.7, 0.1, 0.5],
            regimes=(RegimeParams(beta=[1.1, 0.4], sigma=1.4, rho=0.3),),
        )
        base = ordsel_loglik(params, data, spec, per_observation=True)
        doubled = ordsel_loglik(params, data.replace(weight=2.0 * data.weight), spec)
        assert doubled.value == pytest.approx(2.0 * base.value, rel=1e-12)
        assert base.per_observation is not None
        assert math.fsum(base.per_observation * data.weight) == pytest.approx(base.value)

    def test_floor_flags_underflow(self):
        spec = ModelSpec(2, (1,), (0,))
        params = ParamVector(
            alpha=[0.0], mu=[0.0], regimes=(RegimeParams(beta=[0.0], sigma=1.0, rho=0.0),)
        )
        data = Dataset.create(
            spec,
            stage=[1, 1],
            outcome=[0.5, 1e3],
            x_outcome=[[1.0], [1.0]],
            z_selection=[[1.0], [1.0]],
        )
        report = ordsel_loglik(params, data, spec, per_observation=True)
        assert report.flagged.tolist() == [1]
        assert report.per_observation[1] == pytest.approx(math.log(1e-300))

    def test_mismatched_params(self, sample):
        data, spec = sample
        with pytest.raises(ConfigError):
            ordsel_loglik(ParamVector(alpha=[0.0, 0.0], mu=[-1.0, 0.0, 1.0]), data, spec)


class TestGradient:
    """Test the analytic gradient against central differences."""

    @staticmethod
    def assert_gradient(params, data, spec):
        problem = LikelihoodProblem(data, spec.n_stages, spec)
        packed = pack_params(params)
        analytic = problem.evaluate(packed).gradient
        h = 1e-6
        numeric = np.empty_like(packed)
        for k in range(packed.size):
            up, down = packed.copy(), packed.copy()
            up[k] += h
            down[k] -= h
            numeric[k] = (problem.evaluate(up).value - problem.evaluate(down).value) / (2 * h)
        error = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
        assert error.max() < 1e-5

    def test_single_top_regime(self):
        rng = np.random.default_rng(20)
        for _ in range(50):
            self.assert_gradient(*draw_problem(rng, 4, (3,)))

    def test_two_regimes_with_interior_stage(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            self.assert_gradient(*draw_problem(rng, 5, (2, 4)))

    def test_binary_selection(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            self.assert_gradient(*draw_problem(rng, 2, (1,)))

    def test_per_observation_scores_sum_to_gradient(self, sample):
        data, spec = sample
        params = ParamVector(
            alpha=[0.4, 0.9],
            mu=[-0.7, 0.1, 0.5],
            regimes=(RegimeParams(beta=[1.1, 0.4], sigma=1.4, rho=0.3),),
        )
        report = ordsel_loglik(params, data, spec, per_observation=True)
        assert report.scores is not None
        weighted = (report.scores * data.weight[:, None]).sum(axis=0)
        assert weighted == pytest.approx(report.gradient, rel=1e-10, abs=1e-8)


class TestReparameterization:
    """Test that location shifts absorbed by the cutoffs leave the likelihood unchanged."""

    def test_shifted_selection_column(self):
        rng = np.random.default_rng(30)
        for outcome_stages, n_stages in (((3,), 4), ((2, 4), 5)):
            params, data, spec = draw_problem(rng, n_stages, outcome_stages)
            shift = 1.7
            z = data.z_selection.copy()
            z[:, 2] += shift
            moved = Dataset.create(
                spec,
                stage=data.stage,
                outcome=data.outcome,
                x_outcome=data.x_outcome,
                z_selection=z,
                weight=data.weight,
            )
            adjusted = ParamVector(
                alpha=params.alpha,
                mu=params.mu + params.alpha[2] * shift,
                regimes=params.regimes,
            )
            base = ordsel_loglik(params, data, spec).value
            assert ordsel_loglik(adjusted, moved, spec).value == pytest.approx(base, abs=1e-9)

    def test_added_constant_column(self):
        rng = np.random.default_rng(31)
        params, data, spec = draw_problem(rng, 4, (3,))
        level, coefficient = 2.0, -0.6
        z = np.column_stack([data.z_selection, np.full(data.n, level)])
        widened = Dataset.create(
            spec,
            stage=data.stage,
            outcome=data.outcome,
            x_outcome=data.x_outcome,
            z_selection=z,
            weight=data.weight,
        )
        adjusted = ParamVector(
            alpha=np.append(params.alpha, coefficient),
            mu=params.mu + coefficient * level,
            regimes=params.regimes,
        )
        base = ordsel_loglik(params, data, spec).value
        assert ordsel_loglik(adjusted, widened, spec).value == pytest.approx(base, abs=1e-9)
