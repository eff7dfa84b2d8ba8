import dataclasses

import numpy as np
import pytest

from conftest import random_instance, random_spd
from ngblm.core import ModelSpec, NormalGammaParams, PosteriorSummary, posterior_update
from ngblm.dists import MvNormal
from ngblm.errors import LambdaFixed, NotPositiveDefinite
from ngblm.predictive import (
    PredictionTarget,
    coordinate_marginals,
    lambda_marginal,
    marginal_linear,
    predict_known_lambda,
    predict_t,
)


def conditional_normal_oracle(prior, X, y, joint, Xm, lam):
    """Condition Z on Y = y in the joint Normal with theta integrated out under the prior."""
    n = X.shape[0]
    XX = np.vstack([X, Xm])
    C = (joint + XX @ np.linalg.inv(prior.precision) @ XX.T) / lam
    mu = XX @ prior.theta
    Cyy, Czy, Czz = C[:n, :n], C[n:, :n], C[n:, n:]
    K = Czy @ np.linalg.inv(Cyy)
    return mu[n:] + K @ (y - mu[:n]), Czz - K @ Czy.T


class TestKnownLambda:
    def test_independent_scalar(self, scalar_case):
        post = posterior_update(*scalar_case)
        d = predict_known_lambda(post, PredictionTarget([[1.0]]), lam=1.0)
        assert isinstance(d, MvNormal)
        assert d.mean[0] == pytest.approx(1.0, rel=1e-15)
        assert d.cov[0, 0] == pytest.approx(1.5, rel=1e-15)

    def test_no_regression_no_correlation(self, rng):
        prior, model, y = random_instance(rng, n=6, p=2)
        post = posterior_update(prior, model, y)
        tc = random_spd(rng, 3)
        d = predict_known_lambda(
            post, PredictionTarget(np.zeros((3, 2)), np.zeros((6, 3)), tc), lam=2.0
        )
        np.testing.assert_allclose(d.mean, 0.0, atol=1e-15)
        np.testing.assert_allclose(d.cov, tc / 2.0, rtol=1e-14)

    def test_predict_observed_points(self, rng):
        prior, model, y = random_instance(rng, n=8, p=3)
        post = posterior_update(prior, model, y)
        tgt = PredictionTarget(model.X, model.sigma, model.sigma)
        d = predict_known_lambda(post, tgt, lam=1.0)
        np.testing.assert_allclose(d.mean, y, atol=1e-8)
        np.testing.assert_allclose(d.cov, 0.0, atol=1e-8)

    @pytest.mark.parametrize("seed", range(8))
    def test_conditioning_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n, m, p = int(rng.integers(2, 11)), int(rng.integers(1, 5)), int(rng.integers(1, 4))
        joint = random_spd(rng, n + m)
        X, Xm = rng.standard_normal((n, p)), rng.standard_normal((m, p))
        prior = NormalGammaParams(rng.standard_normal(p), random_spd(rng, p), 2.0, 1.0)
        y = rng.standard_normal(n)
        lam = 1.3
        post = posterior_update(prior, ModelSpec(X, joint[:n, :n]), y)
        d = predict_known_lambda(post, PredictionTarget(Xm, joint[:n, n:], joint[n:, n:]), lam)
        mean, cov = conditional_normal_oracle(prior, X, y, joint, Xm, lam)
        np.testing.assert_allclose(d.mean, mean, atol=1e-8)
        np.testing.assert_allclose(d.cov, cov, atol=1e-8)

    def test_uses_known_lambda_by_default(self, scalar_case):
        prior, model, y = scalar_case
        known = NormalGammaParams(prior.theta, prior.precision, 1.0, 1.0, lambda_known=4.0)
        d = predict_known_lambda(posterior_update(known, model, y), PredictionTarget([[1.0]]))
        assert d.cov[0, 0] == pytest.approx(1.5 / 4.0)


class TestPredictT:
    def test_scalar(self, scalar_case):
        d = predict_t(posterior_update(*scalar_case), PredictionTarget([[1.0]]))
        assert d.dof == 3.0
        assert d.mean[0] == pytest.approx(1.0, rel=1e-15)
        assert d.dispersion[0, 0] == pytest.approx(2.0, rel=1e-15)

    def test_observed_points_collapse(self, rng):
        prior, model, y = random_instance(rng, n=10, p=2)
        post = posterior_update(prior, model, y)
        d = predict_t(post, PredictionTarget(model.X, model.sigma, model.sigma))
        assert np.all(np.abs(np.diag(d.dispersion)) < 1e-8)
        np.testing.assert_allclose(d.mean, y, atol=1e-8)

    def test_exchangeable_targets(self, rng):
        prior, model, y = random_instance(rng, n=6, p=2, correlated=False)
        post = posterior_update(prior, model, y)
        Xm = np.array([[1.0, 0.5], [-0.2, 2.0]])
        a = predict_t(post, PredictionTarget(Xm))
        b = predict_t(post, PredictionTarget(Xm[::-1]))
        np.testing.assert_allclose(b.mean, a.mean[::-1], rtol=1e-14)
        np.testing.assert_allclose(b.dispersion, a.dispersion[::-1, ::-1], rtol=1e-14)
        same = predict_t(post, PredictionTarget(np.vstack([Xm[0], Xm[0]])))
        assert same.mean[0] == same.mean[1]
        assert same.dispersion[0, 0] == same.dispersion[1, 1]

    def test_dispersion_symmetric_psd(self, rng):
        prior, model, y = random_instance(rng, n=12, p=3)
        post = posterior_update(prior, model, y)
        joint = model.sigma
        d = predict_t(post, PredictionTarget(model.X[:4], joint[:, :4], joint[:4, :4] + 0.1 * np.eye(4)))
        assert np.max(np.abs(d.dispersion - d.dispersion.T)) <= 1e-12
        d.chol  # factorizes without jitter

    def test_invalid_joint(self, rng):
        prior, model, y = random_instance(rng, n=5, p=1, correlated=False)
        post = posterior_update(prior, model, y)
        tgt = PredictionTarget([[1.0]], cross_cov=np.full((5, 1), 2.0), target_cov=[[1.0]])
        with pytest.raises(NotPositiveDefinite):
            predict_t(post, tgt)

    def test_known_lambda_rejected(self, scalar_case):
        prior, model, y = scalar_case
        known = NormalGammaParams(prior.theta, prior.precision, 1.0, 1.0, lambda_known=1.0)
        with pytest.raises(LambdaFixed):
            predict_t(posterior_update(known, model, y), PredictionTarget([[1.0]]))

    def test_normal_limit(self, rng):
        prior, model, y = random_instance(rng, n=10, p=2)
        post = posterior_update(prior, model, y)
        ratio = post.rate / post.shape
        big = NormalGammaParams(post.theta, post.posterior.precision, 1e6, 1e6 * ratio)
        scaled = dataclasses.replace(post, posterior=big)
        tgt = PredictionTarget(rng.standard_normal((1, 2)), rng.standard_normal((10, 1)) * 0.1, [[2.0]])
        t_dist = predict_t(scaled, tgt)
        n_dist = predict_known_lambda(post, tgt, lam=1.0 / ratio)
        sd = np.sqrt(n_dist.cov[0, 0])
        for z in np.linspace(-2, 2, 5):
            x = n_dist.mean + z * sd
            assert np.exp(t_dist.logpdf(x)) == pytest.approx(np.exp(n_dist.logpdf(x)), abs=1e-3)

    def test_summary_without_data(self, scalar_case):
        post = posterior_update(*scalar_case)
        bare = PosteriorSummary.from_posterior(post.posterior)
        a = predict_t(post, PredictionTarget([[1.0]]))
        b = predict_t(bare, PredictionTarget([[1.0]]))
        assert a.mean[0] == b.mean[0] and a.dispersion[0, 0] == b.dispersion[0, 0]


class TestMarginals:
    def test_identity_functional(self, rng):
        prior, model, y = random_instance(rng, n=15, p=3)
        post = posterior_update(prior, model, y)
        d = marginal_linear(post, np.eye(3))
        np.testing.assert_allclose(d.mean, post.theta)
        np.testing.assert_allclose(d.dispersion, post.rate / post.shape * post.An_inv, rtol=1e-10)

    def test_coordinate_consistency(self, rng):
        prior, model, y = random_instance(rng, n=15, p=4)
        post = posterior_update(prior, model, y)
        full = marginal_linear(post, np.eye(4))
        for j, d in enumerate(coordinate_marginals(post)):
            assert d.dof == 2 * post.shape
            assert d.mean[0] == pytest.approx(full.mean[j], rel=1e-14)
            assert d.dispersion[0, 0] == pytest.approx(full.dispersion[j, j], rel=1e-12)
            assert d.dispersion[0, 0] == pytest.approx(post.rate / post.shape * post.An_inv[j, j], rel=1e-12)

    def test_scalar(self, scalar_case):
        d = marginal_linear(posterior_update(*scalar_case), [[1.0]])
        assert d.dof == 3.0
        assert d.mean[0] == pytest.approx(1.0)
        assert d.dispersion[0, 0] == pytest.approx(2.0 / 3.0, rel=1e-14)

    def test_known_lambda_normal(self, scalar_case):
        prior, model, y = scalar_case
        known = NormalGammaParams(prior.theta, prior.precision, 1.0, 1.0, lambda_known=2.0)
        d = marginal_linear(posterior_update(known, model, y), [[1.0]])
        assert isinstance(d, MvNormal)
        assert d.cov[0, 0] == pytest.approx(0.25)


class TestLambdaMarginal:
    def test_scalar(self, scalar_case):
        g = lambda_marginal(posterior_update(*scalar_case))
        assert (g.shape, g.rate) == (1.5, pytest.approx(2.0))
        assert g.mean == pytest.approx(0.75)
        post = posterior_update(*scalar_case)
        assert 1.0 / g.mean == pytest.approx(post.rate / post.shape)

    def test_no_data(self):
        prior = NormalGammaParams.isotropic(2, shape=2.5, rate=0.5)
        g = lambda_marginal(posterior_update(prior, ModelSpec(np.zeros((0, 2))), []))
        assert (g.shape, g.rate) == (2.5, 0.5)

    def test_fixed(self, scalar_case):
        prior, model, y = scalar_case
        known = NormalGammaParams(prior.theta, prior.precision, 1.0, 1.0, lambda_known=2.0)
        with pytest.raises(LambdaFixed):
            lambda_marginal(posterior_update(known, model, y))
