import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simcal.data import ProblemData
from simcal.errors import ConfigurationError
from simcal.posterior import (
    PosteriorModel,
    functional_value,
    log_likelihood,
    log_posterior,
    log_prior,
)
from simcal.prior import GaussianPriorSpec

LOG_HALF = -0.6931471805599453


def _identity_prior(dim=2, lambda_d=0.25, lambda_p=0.01):
    return GaussianPriorSpec(
        lambda_d=lambda_d, lambda_p=lambda_p, jitter=0.0, R_d=np.eye(dim), R_p=np.eye(dim)
    )


class TestLogLikelihood:
    def test_single_observation(self):
        data = ProblemData([0.0], [[1, 0]], [[0, 0]])
        val = log_likelihood([[1.0, 1.0]], [[0.5, 0.5]], data)
        assert val == pytest.approx(LOG_HALF, abs=1e-12)

    def test_real_and_sim_counts(self):
        data = ProblemData([0.0], [[1, 0]], [[3, 1]])
        val = log_likelihood([[2.0, 0.0]], [[0.5, 0.5]], data)
        # log(2 * 0.5) + 3 log 0.5 + 1 log 0.5
        assert val == pytest.approx(4 * LOG_HALF, abs=1e-12)

    def test_zero_count_zero_probability_contributes_nothing(self):
        data = ProblemData([0.0], [[0, 2]], [[0, 3]])
        val = log_likelihood([[0.0, 2.0]], [[0.0, 1.0]], data)
        assert val == pytest.approx(2 * np.log(2.0) + 0.0, abs=1e-12)

    def test_positive_count_on_zero_probability(self):
        data = ProblemData([0.0], [[1, 0]], [[0, 0]])
        assert log_likelihood([[0.0, 2.0]], [[0.5, 0.5]], data) == float("-inf")

    def test_additive_across_designs(self):
        data1 = ProblemData([0.0], [[2, 1]], [[4, 4]])
        data2 = ProblemData([1.0], [[1, 3]], [[2, 6]])
        joint = ProblemData([0.0, 1.0], [[2, 1], [1, 3]], [[4, 4], [2, 6]])
        d = np.array([[1.2, 0.8], [0.9, 1.05]])
        q = np.array([[0.5, 0.5], [1.0 / 3, 2.0 / 3]])
        sep = log_likelihood(d[:1], q[:1], data1) + log_likelihood(d[1:], q[1:], data2)
        assert log_likelihood(d, q, joint) == pytest.approx(sep, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        data = ProblemData([0.0], [[1, 0]], [[0, 0]])
        with pytest.raises(ConfigurationError):
            log_likelihood([[1.0, 1.0, 1.0]], [[0.5, 0.25, 0.25]], data)


class TestLogPrior:
    def test_quadratic_value(self):
        val = log_prior([[2.0, 0.0]], [[0.5, 0.5]], _identity_prior())
        # Discrepancy deviation (1, -1) with weight 1/4; probabilities at their mean.
        assert val == pytest.approx(-0.5, abs=1e-12)

    def test_off_region_states(self):
        prior = _identity_prior()
        assert log_prior([[1.0, 1.0]], [[0.6, 0.5]], prior) == float("-inf")
        assert log_prior([[1.5, 1.0]], [[0.5, 0.5]], prior) == float("-inf")
        assert log_prior([[-0.5, 2.5]], [[0.5, 0.5]], prior) == float("-inf")

    def test_prior_mean_state_scores_zero(self):
        val = log_prior([[1.0, 1.0]], [[0.5, 0.5]], _identity_prior())
        assert val == pytest.approx(0.0, abs=1e-14)

    def test_kernel_prior_requires_coords(self):
        spec = GaussianPriorSpec(lambda_d=0.25, lambda_p=0.01)
        with pytest.raises(ConfigurationError):
            log_prior([[1.0, 1.0]], [[0.5, 0.5]], spec)
        val = log_prior([[1.0, 1.0]], [[0.5, 0.5]], spec, design_coords=[0.0])
        assert val == pytest.approx(0.0, abs=1e-14)


class TestLogPosterior:
    def test_frozen_composite(self):
        data = ProblemData([0.0], [[1, 0]], [[3, 1]])
        model = PosteriorModel(data=data, prior=_identity_prior())
        val = log_posterior(model, [[2.0, 0.0]], [[0.5, 0.5]])
        assert val == pytest.approx(4 * LOG_HALF - 0.5, abs=1e-12)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_additivity(self, seed):
        rng = np.random.default_rng(seed)
        data = ProblemData([0.0, 1.0], [[2, 1, 0], [0, 1, 4]], [[5, 3, 2], [1, 1, 8]])
        prior = GaussianPriorSpec(lambda_d=0.25, lambda_p=0.01)
        model = PosteriorModel(data=data, prior=prior)
        q = rng.random((2, 3)) + 0.1
        q /= q.sum(axis=1, keepdims=True)
        p = rng.random((2, 3)) + 0.1
        p /= p.sum(axis=1, keepdims=True)
        d = p / q
        total = model.log_posterior(d, q)
        assert total == pytest.approx(
            model.log_likelihood(d, q) + model.log_prior(d, q), abs=1e-10
        )

    def test_product_form_agrees(self):
        data = ProblemData([0.0, 1.0], [[2, 1, 0], [0, 1, 4]], [[5, 3, 2], [1, 1, 8]])
        model = PosteriorModel(data=data, prior=GaussianPriorSpec(lambda_d=0.25, lambda_p=0.01))
        rng = np.random.default_rng(11)
        q = rng.random((2, 3)) + 0.1
        q /= q.sum(axis=1, keepdims=True)
        p = rng.random((2, 3)) + 0.1
        p /= p.sum(axis=1, keepdims=True)
        d = p / q
        assert model.log_posterior_pq(p, q) == pytest.approx(model.log_posterior(d, q), abs=1e-10)

    def test_product_form_rejects_mass_on_dead_cell(self):
        data = ProblemData([0.0], [[1, 1]], [[2, 2]])
        model = PosteriorModel(data=data, prior=_identity_prior())
        assert model.log_posterior_pq([[0.5, 0.5]], [[1.0, 0.0]]) == float("-inf")

    def test_functional_value(self):
        z = np.array([[1.0, 0.0], [0.5, 0.5]])
        d = np.array([[2.0, 0.0], [1.0, 1.0]])
        q = np.array([[0.5, 0.5], [0.25, 0.75]])
        assert functional_value(z, d, q) == pytest.approx(1.0 + 0.5, abs=1e-14)
