"""Tests for covariance estimation, delta transforms and Wald tests."""

import numpy as np
import pytest
from scipy import stats

from oheckman.errors import ConfigError, SingularMatrixError
from oheckman.inference import (
    CovarianceMethod,
    CovarianceRequest,
    DeltaTarget,
    cluster_sums,
    confidence_interval,
    covariance,
    covariance_label,
    delta_transform,
    equality_matrix,
    numerical_hessian,
    selection_matrix,
    two_sided_p_value,
    wald,
    wald_test,
)
from oheckman.results import FitResult, ScoreContext


def make_fit(params, cov, names=None) -> FitResult:
    params = np.asarray(params, dtype=float)
    return FitResult(
        estimator="test",
        names=list(names or [f"p{k}" for k in range(params.size)]),
        params=params,
        covariance=np.asarray(cov, dtype=float),
    )


def quadratic_context(scores, cluster_id=None) -> ScoreContext:
    """Context whose objective is -0.5 * theta' A theta with known per-row scores."""
    a = np.array([[2.0, 0.5], [0.5, 1.0]])
    return ScoreContext(
        estimate=np.zeros(2),
        gradient=lambda t: -a @ t,
        weighted_scores=lambda t: scores,
        cluster_id=np.arange(scores.shape[0]) if cluster_id is None else cluster_id,
    )


class TestDeltaTransform:
    """Test first-order delta-method transforms."""

    def test_tanh_at_zero(self):
        fit = make_fit([0.0], [[0.01]])
        out = delta_transform(fit, [DeltaTarget("rho", 0, "tanh")])
        assert out["rho"].estimate == 0.0
        assert out["rho"].std_error == pytest.approx(0.1)

    def test_exp(self):
        fit = make_fit([0.5], [[0.04]])
        out = delta_transform(fit, [DeltaTarget("sigma", 0, "exp")])
        assert out["sigma"].estimate == pytest.approx(1.6487, abs=1e-4)
        assert out["sigma"].std_error == pytest.approx(0.3297, abs=1e-4)

    def test_expm1(self):
        fit = make_fit([0.2], [[0.09]])
        out = delta_transform(fit, [DeltaTarget("effect", 0, "expm1")])
        assert out["effect"].estimate == pytest.approx(np.expm1(0.2))
        assert out["effect"].std_error == pytest.approx(np.exp(0.2) * 0.3)

    def test_uses_packed_scale_when_available(self):
        fit = make_fit([np.tanh(0.3)], [[1.0]])
        fit.packed = np.array([0.3])
        fit.packed_covariance = np.array([[0.04]])
        out = delta_transform(fit, [DeltaTarget("rho", 0, "tanh")])
        assert out["rho"].estimate == pytest.approx(np.tanh(0.3))
        assert out["rho"].std_error == pytest.approx((1.0 - np.tanh(0.3) ** 2) * 0.2)

    def test_unknown_transform(self):
        with pytest.raises(ConfigError):
            delta_transform(make_fit([0.0], [[1.0]]), [DeltaTarget("x", 0, "log")])


class TestWald:
    """Test Wald statistics."""

    def test_zero_distance(self):
        result = wald_test(np.array([1.0, 2.0]), np.eye(2), np.array([[1.0, 0.0]]), [1.0])
        assert result.statistic == 0.0
        assert result.p_value == 1.0
        assert result.df == 1

    def test_single_restriction_is_squared_t_ratio(self):
        estimate = np.array([0.3, -0.1])
        cov = np.array([[0.01, 0.002], [0.002, 0.04]])
        result = wald_test(estimate, cov, selection_matrix(["a", "b"], ["a"]))
        assert result.statistic == pytest.approx((0.3 / 0.1) ** 2)
        assert result.p_value == pytest.approx(two_sided_p_value(0.3, 0.1))

    def test_invariant_to_reexpressed_restrictions(self):
        rng = np.random.default_rng(0)
        estimate = rng.normal(size=3)
        half = rng.normal(size=(3, 3))
        cov = half @ half.T + np.eye(3)
        R = np.array([[1.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
        mixed = np.array([[2.0, 1.0], [0.0, 3.0]]) @ R
        assert wald_test(estimate, cov, mixed).statistic == pytest.approx(
            wald_test(estimate, cov, R).statistic, rel=1e-10
        )

    def test_joint_statistic_against_chi_square(self):
        fit = make_fit([0.2, 0.1, 5.0], np.diag([0.01, 0.01, 1.0]), ["a", "b", "c"])
        result = wald(fit, selection_matrix(fit.names, ["a", "b"]))
        assert result.statistic == pytest.approx(4.0 + 1.0)
        assert result.p_value == pytest.approx(stats.chi2.sf(5.0, 2))

    def test_singular_middle_matrix(self):
        cov = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SingularMatrixError):
            wald_test(np.array([1.0, 0.0]), cov, equality_matrix(["a", "b"], "a", "b"))

    def test_rank_deficient_restriction(self):
        with pytest.raises(ConfigError):
            wald_test(np.zeros(2), np.eye(2), np.array([[1.0, 0.0], [2.0, 0.0]]))

    def test_width_mismatch(self):
        with pytest.raises(ConfigError):
            wald_test(np.zeros(2), np.eye(2), np.array([[1.0, 0.0, 0.0]]))

    def test_packed_scale(self):
        fit = make_fit([np.tanh(1.0)], [[0.5]])
        fit.packed = np.array([1.0])
        fit.packed_covariance = np.array([[0.25]])
        assert wald(fit, np.eye(1), scale="packed").statistic == pytest.approx(4.0)
        with pytest.raises(ConfigError):
            wald(fit, np.eye(1), scale="natural")


class TestConfidenceInterval:
    """Test normal-theory intervals."""

    def test_ninety_five_percent(self):
        interval = confidence_interval(make_fit([0.1], [[0.05**2]]))
        assert interval[0] == pytest.approx([0.002, 0.198], abs=1e-3)

    def test_zero_standard_error(self):
        interval = confidence_interval(make_fit([1.5], [[0.0]]))
        assert interval[0, 0] == interval[0, 1] == 1.5

    @pytest.mark.parametrize("level", [0.0, 1.0, 95.0])
    def test_invalid_level(self, level):
        with pytest.raises(ConfigError):
            confidence_interval(make_fit([0.0], [[1.0]]), level)


class TestCovariance:
    """Test sandwich and information-based covariances."""

    def test_observed_information_is_inverse_hessian(self):
        context = quadratic_context(np.zeros((4, 2)))
        expected = np.linalg.inv(np.array([[2.0, 0.5], [0.5, 1.0]]))
        assert np.allclose(covariance(context), expected, atol=1e-8)

    def test_singular_information(self):
        context = ScoreContext(
            estimate=np.zeros(2),
            gradient=lambda t: -np.array([t[0] + t[1], t[0] + t[1]]),
            weighted_scores=lambda t: np.zeros((3, 2)),
            cluster_id=np.arange(3),
        )
        with pytest.raises(SingularMatrixError):
            covariance(context)

    def test_cluster_ids_relabeled_or_reordered(self):
        rng = np.random.default_rng(1)
        scores = rng.normal(size=(30, 2))
        clusters = rng.integers(0, 6, size=30)
        request = CovarianceRequest(method=CovarianceMethod.CLUSTER_ROBUST)
        base = covariance(quadratic_context(scores, clusters), request)
        relabeled = covariance(quadratic_context(scores, 100 - 7 * clusters), request)
        order = rng.permutation(30)
        shuffled = covariance(quadratic_context(scores[order], clusters[order]), request)
        assert np.allclose(relabeled, base, rtol=1e-10)
        assert np.allclose(shuffled, base, rtol=1e-10)

    def test_cluster_override_must_cover_rows(self):
        request = CovarianceRequest(
            method=CovarianceMethod.CLUSTER_ROBUST, cluster_id=np.arange(3)
        )
        with pytest.raises(ConfigError):
            covariance(quadratic_context(np.ones((5, 2))), request)

    def test_cluster_sums(self):
        scores = np.arange(8.0).reshape(4, 2)
        sums = cluster_sums(scores, np.array(["b", "a", "b", "a"]))
        assert sums.tolist() == [[8.0, 10.0], [4.0, 6.0]]

    def test_numerical_hessian_of_quadratic(self):
        a = np.array([[3.0, 1.0], [1.0, 2.0]])
        hess = numerical_hessian(lambda t: a @ t, np.array([0.4, -0.2]), step=1e-4)
        assert np.allclose(hess, a, atol=1e-8)

    def test_labels(self):
        assert covariance_label(None) == "observed_information"
        assert covariance_label(CovarianceRequest(method=CovarianceMethod.ROBUST)) == "robust"


class TestRestrictionMatrices:
    """Test helper constructors for restrictions."""

    def test_selection_matrix(self):
        R = selection_matrix(["a", "b", "c"], ["c", "a"])
        assert R.tolist() == [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]

    def test_equality_matrix(self):
        R = equality_matrix(["a", "b", "c"], "b", "c")
        assert R.tolist() == [[0.0, 1.0, -1.0]]

    def test_p_value_needs_positive_error(self):
        assert np.isnan(two_sided_p_value(1.0, 0.0))
        assert two_sided_p_value(1.959964, 1.0) == pytest.approx(0.05, abs=1e-6)
