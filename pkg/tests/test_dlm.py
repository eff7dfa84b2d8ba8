import math

import numpy as np
import pytest

from ngblm.core import ModelSpec, NormalGammaParams, posterior_update
from ngblm.dlm import DlmSpec, DlmState, dlm_evolve, dlm_filter, dlm_forecast, dlm_update
from ngblm.errors import DimensionMismatch, NotPositiveDefinite


def scalar_state():
    return DlmState(0, [0.0], [[1.0]], 1.0, 1.0)


class TestEvolve:
    def test_identity_no_noise(self):
        s = scalar_state()
        assert dlm_evolve(s, [[1.0]], [[0.0]]) is s
        assert dlm_evolve(s) is s

    def test_scaling(self):
        s = DlmState(0, [0.5], [[1.0]], 1.0, 1.0)
        e = dlm_evolve(s, [[2.0]], [[0.0]])
        assert e.mean[0] == 1.0
        assert e.covariance[0, 0] == pytest.approx(4.0, rel=1e-15)
        assert e.precision[0, 0] == pytest.approx(0.25, rel=1e-15)
        assert (e.shape, e.rate) == (1.0, 1.0)

    def test_additive_noise(self):
        e = dlm_evolve(scalar_state(), [[1.0]], [[1.0]])
        assert e.covariance[0, 0] == pytest.approx(2.0, rel=1e-15)

    def test_matrix_oracle(self, rng):
        M = rng.standard_normal((3, 3))
        P = M @ M.T + np.eye(3)
        G, W = rng.standard_normal((3, 3)), np.diag([0.1, 0.0, 0.3])
        s = DlmState(2, rng.standard_normal(3), P, 2.0, 1.0)
        e = dlm_evolve(s, G, W)
        np.testing.assert_allclose(e.mean, G @ s.mean, rtol=1e-14)
        np.testing.assert_allclose(np.linalg.inv(e.precision), G @ np.linalg.inv(P) @ G.T + W, rtol=1e-9)
        assert e.t == 2

    def test_degenerate(self):
        s = DlmState(0, [0.0, 0.0], np.eye(2), 1.0, 1.0)
        with pytest.raises(NotPositiveDefinite):
            dlm_evolve(s, [[1.0, 1.0], [1.0, 1.0]], np.zeros((2, 2)))

    def test_shape_check(self):
        with pytest.raises(DimensionMismatch):
            dlm_evolve(scalar_state(), np.eye(2), None)


class TestUpdate:
    def test_scalar(self):
        s = dlm_update(scalar_state(), [1.0], 2.0)
        assert s.mean[0] == pytest.approx(1.0, rel=1e-15)
        assert s.precision[0, 0] == 2.0
        assert s.shape == 1.5
        assert s.rate == pytest.approx(2.0, rel=1e-15)
        assert s.t == 1

    def test_zero_row(self):
        s0 = DlmState(0, [0.3, -1.0], [[2.0, 0.5], [0.5, 1.0]], 1.0, 1.0)
        s = dlm_update(s0, [0.0, 0.0], 3.0)
        np.testing.assert_allclose(s.mean, s0.mean, rtol=1e-14)
        np.testing.assert_array_equal(s.precision, s0.precision)
        assert s.shape == 1.5
        assert s.rate == pytest.approx(1.0 + 4.5, rel=1e-15)

    def test_row_length(self):
        with pytest.raises(DimensionMismatch):
            dlm_update(scalar_state(), [1.0, 0.0], 1.0)


class TestForecast:
    def test_fresh_prior(self):
        d = dlm_forecast(scalar_state(), [1.0], [[1.0]], [[0.0]])
        assert (d.dof, d.mean[0], d.dispersion[0, 0]) == (2.0, 0.0, pytest.approx(2.0, rel=1e-15))
        assert d.logpdf([2.0]) == pytest.approx(-3.5 * math.log(2.0), rel=1e-14)

    def test_zero_row(self):
        s = DlmState(0, [4.0], [[1.0]], 2.0, 3.0)
        d = dlm_forecast(s, [0.0])
        assert d.mean[0] == 0.0
        assert d.dispersion[0, 0] == pytest.approx(1.5, rel=1e-15)

    def test_after_update(self):
        s = dlm_update(scalar_state(), [1.0], 2.0)
        d = dlm_forecast(s, [1.0], [[1.0]], [[0.0]])
        assert d.dof == 3.0
        assert d.mean[0] == pytest.approx(1.0, rel=1e-15)
        assert d.dispersion[0, 0] == pytest.approx(2.0, rel=1e-14)

    def test_with_evolution(self, rng):
        s = DlmState(3, [1.0, 0.5], np.diag([2.0, 4.0]), 2.5, 1.5)
        G, W, phi = np.array([[1.0, 1.0], [0.0, 1.0]]), 0.1 * np.eye(2), np.array([1.0, 0.0])
        d = dlm_forecast(s, phi, G, W)
        R = G @ np.diag([0.5, 0.25]) @ G.T + W
        assert d.dof == 5.0
        assert d.mean[0] == pytest.approx(phi @ G @ s.mean)
        assert d.dispersion[0, 0] == pytest.approx(1.5 / 2.5 * (1 + phi @ R @ phi), rel=1e-12)


def trend_series(rng, T):
    t = np.arange(1, T + 1, dtype=float)
    return t, 0.5 + 0.2 * t + 0.3 * rng.standard_normal(T)


class TestFilter:
    @pytest.mark.parametrize("T", [1, 5, 30])
    def test_static_matches_batch(self, rng, T):
        t, y = trend_series(rng, T)
        prior = NormalGammaParams([0.0, 0.0], np.diag([0.5, 2.0]), 1.5, 0.7)
        spec = DlmSpec(phi=lambda k: np.array([1.0, float(k)]))
        steps = dlm_filter(spec, DlmState(0, prior.theta, prior.precision, prior.shape, prior.rate), y)
        batch = posterior_update(prior, ModelSpec(np.column_stack([np.ones(T), t])), y)
        last = steps[-1].filtered
        np.testing.assert_allclose(last.mean, batch.theta, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(last.precision, batch.posterior.precision, rtol=1e-9)
        assert last.shape == batch.shape
        assert last.rate == pytest.approx(batch.rate, rel=1e-9)
        assert sum(s.log_forecast for s in steps) == pytest.approx(batch.log_evidence, abs=1e-7)

    def test_forecast_is_evidence_increment(self, rng):
        _, y = trend_series(rng, 12)
        spec = DlmSpec(phi=[1.0, 0.3], G=[[1.0, 0.1], [0.0, 0.9]], W=0.05 * np.eye(2))
        steps = dlm_filter(spec, DlmState(0, [0.0, 0.0], np.eye(2), 1.0, 1.0), y)
        prev = 0.0
        for s in steps:
            assert s.log_forecast == pytest.approx(s.filtered.log_evidence - prev, abs=1e-8)
            prev = s.filtered.log_evidence

    def test_shape_increments(self, rng):
        _, y = trend_series(rng, 10)
        spec = DlmSpec(phi=[1.0], G=[[0.95]], W=[[0.2]])
        steps = dlm_filter(spec, DlmState(0, [0.0], [[1.0]], 2.0, 1.0), y)
        assert [s.filtered.shape for s in steps] == [2.0 + 0.5 * (k + 1) for k in range(10)]
        assert [s.t for s in steps] == list(range(1, 11))

    def test_time_varying_provider(self):
        seen = []

        def G(t):
            seen.append(t)
            return np.eye(1)

        dlm_filter(DlmSpec(phi=[1.0], G=G, W=[[0.1]]), scalar_state(), [1.0, 2.0, 3.0])
        assert seen == [1, 2, 3]

    def test_single_observation(self):
        (step,) = dlm_filter(DlmSpec(phi=[1.0]), scalar_state(), [2.0])
        assert step.forecast.dispersion[0, 0] == pytest.approx(2.0)
        assert step.log_forecast == pytest.approx(-3.5 * math.log(2.0), rel=1e-14)
        assert step.filtered.mean[0] == pytest.approx(1.0)
