"""
DP-SGD step tests: clipping, Poisson sampling, noise and determinism.
"""
import numpy as np
import pytest
from hypothesis import assume, given, settings as hyp_settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from pydantic import ValidationError
from scipy import stats

from app.core.exceptions import TrainingError
from app.services.classifier import ModelParams, SampleSet, init_params, per_sample_gradients
from app.services.dp_sgd import (
    NOISE_STREAM,
    DpSgdConfig,
    RngStream,
    clip_gradient,
    clip_gradients,
    dp_sgd_step,
    poisson_sample,
)
from app.services.models.base import ArchitectureSpec, ModelKind

SPEC = ArchitectureSpec(kind=ModelKind.LOGISTIC_REGRESSION, input_dim=3)


def _data(n: int, seed: int = 0) -> SampleSet:
    rng = np.random.default_rng(seed)
    return SampleSet(features=rng.normal(size=(n, 3)), labels=rng.integers(0, 2, size=n))


class TestClipping:
    def test_below_threshold_unchanged(self):
        g = np.array([0.3, -0.4])
        np.testing.assert_array_equal(clip_gradient(g, 1.0), g)

    def test_scaled_to_threshold(self):
        np.testing.assert_allclose(clip_gradient(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])

    def test_rejects_non_positive_bound(self):
        with pytest.raises(TrainingError):
            clip_gradient(np.ones(2), 0.0)

    @hyp_settings(max_examples=200, deadline=None)
    @given(
        g=arrays(np.float64, st.integers(1, 20), elements=st.floats(-1e6, 1e6)),
        clip_c=st.floats(min_value=1e-3, max_value=1e3),
    )
    def test_norm_bounded_and_direction_kept(self, g, clip_c):
        clipped = clip_gradient(g, clip_c)
        norm = np.linalg.norm(g)
        assert np.linalg.norm(clipped) <= clip_c * (1.0 + 1e-9)
        if norm <= clip_c:
            np.testing.assert_array_equal(clipped, g)
        assume(norm > 1e-6)
        cosine = float(np.dot(clipped, g)) / (np.linalg.norm(clipped) * norm)
        assert cosine == pytest.approx(1.0, abs=1e-9)

    def test_many_random_gradients(self):
        rng = np.random.default_rng(5)
        gradients = rng.normal(size=(10_000, 8)) * rng.exponential(3.0, size=(10_000, 1))
        clipped = clip_gradients(gradients, 1.5)
        assert np.all(np.linalg.norm(clipped, axis=1) <= 1.5 * (1.0 + 1e-12))
        small = np.linalg.norm(gradients, axis=1) <= 1.5
        np.testing.assert_array_equal(clipped[small], gradients[small])


class TestPoissonSampling:
    def test_full_rate_takes_everything(self):
        np.testing.assert_array_equal(poisson_sample(50, 1.0, RngStream(seed=3)), np.arange(50))

    def test_zero_rate_takes_nothing(self):
        assert poisson_sample(50, 0.0, RngStream(seed=3)).size == 0

    def test_mean_batch_size(self):
        n, q, draws = 1000, 0.1, 10_000
        sizes = np.array([poisson_sample(n, q, RngStream(seed=1, keys=(i,))).size for i in range(draws)])
        standard_error = np.sqrt(n * q * (1 - q)) / np.sqrt(draws)
        assert abs(sizes.mean() - n * q) < 3 * standard_error

    def test_same_stream_same_batch(self):
        a = poisson_sample(200, 0.3, RngStream(seed=9, keys=(1, 2)))
        b = poisson_sample(200, 0.3, RngStream(seed=9, keys=(1, 2)))
        np.testing.assert_array_equal(a, b)

    def test_empty_dataset(self):
        with pytest.raises(TrainingError):
            poisson_sample(0, 0.5, RngStream(seed=0))

    def test_inclusion_is_uniform_and_memoryless(self):
        n, q, steps = 20, 0.3, 2000
        root = RngStream(seed=11)
        masks = np.zeros((steps, n), dtype=bool)
        for step in range(steps):
            masks[step, poisson_sample(n, q, root.child(step))] = True
        counts = masks.sum(axis=0)
        assert counts.mean() / steps == pytest.approx(q, abs=0.02)
        assert stats.chisquare(counts).pvalue > 1e-3
        # inclusion at one step says nothing about the next
        before, after = masks[:-1].ravel(), masks[1:].ravel()
        table = [
            [np.sum(before & after), np.sum(before & ~after)],
            [np.sum(~before & after), np.sum(~before & ~after)],
        ]
        assert stats.chi2_contingency(table).pvalue > 1e-3


class TestRngStream:
    def test_child_extends_key_path(self):
        assert RngStream(seed=4, keys=(1,)).child(2, 3) == RngStream(seed=4, keys=(1, 2, 3))

    def test_distinct_keys_give_distinct_draws(self):
        a = RngStream(seed=4).child(1).generator().random(5)
        b = RngStream(seed=4).child(2).generator().random(5)
        assert not np.array_equal(a, b)


class TestStep:
    def test_noise_is_replayable(self):
        data = _data(1)
        params = init_params(SPEC, seed=0)
        cfg = DpSgdConfig(q=1.0, eta=0.1, sigma=1.0, clip_c=1.0)
        rng = RngStream(seed=42, keys=(1, 1, 0))

        updated = dp_sgd_step(params, data, cfg, rng)

        gradient = clip_gradient(per_sample_gradients(params, data.features, data.labels)[0], cfg.clip_c)
        noise = rng.child(NOISE_STREAM).generator().standard_normal(SPEC.n_params) * cfg.sigma * cfg.clip_c
        np.testing.assert_allclose(updated.theta, params.theta - cfg.eta * (gradient + noise), rtol=1e-12, atol=1e-15)

    def test_noise_scale(self):
        data = _data(1)
        params = init_params(SPEC, seed=0)
        cfg = DpSgdConfig(q=1.0, eta=1.0, sigma=1.5, clip_c=2.0)
        gradient = clip_gradient(per_sample_gradients(params, data.features, data.labels)[0], cfg.clip_c)

        noise = np.array([
            params.theta - dp_sgd_step(params, data, cfg, RngStream(seed=0, keys=(i,))).theta - gradient
            for i in range(10_000)
        ])
        target = cfg.sigma * cfg.clip_c
        standard_error = target / np.sqrt(2 * noise.size)
        assert abs(noise.std() - target) < 3 * standard_error
        assert abs(noise.mean()) < 3 * target / np.sqrt(noise.size)

    def test_no_noise_full_batch_is_gradient_descent(self):
        data = _data(20)
        params = init_params(SPEC, seed=1)
        cfg = DpSgdConfig(q=1.0, eta=0.3, sigma=0.0, clip_c=1e9)
        updated = dp_sgd_step(params, data, cfg, RngStream(seed=0))
        expected = params.theta - cfg.eta * per_sample_gradients(params, data.features, data.labels).mean(axis=0)
        np.testing.assert_allclose(updated.theta, expected, rtol=1e-12, atol=1e-15)

    def test_empty_batch_leaves_params(self):
        data = _data(2)
        params = init_params(SPEC, seed=0)
        cfg = DpSgdConfig(q=1e-12, eta=0.5, sigma=1.0, clip_c=1.0)
        assert dp_sgd_step(params, data, cfg, RngStream(seed=0)) == params

    def test_deterministic(self):
        data = _data(30)
        params = init_params(SPEC, seed=0)
        cfg = DpSgdConfig(q=0.2, eta=0.5, sigma=1.0, clip_c=1.0)
        first = dp_sgd_step(params, data, cfg, RngStream(seed=8, keys=(1, 1, 0)))
        second = dp_sgd_step(params, data, cfg, RngStream(seed=8, keys=(1, 1, 0)))
        assert first == second

    def test_update_is_bounded_without_noise(self):
        data = _data(40)
        params = ModelParams(theta=np.full(SPEC.n_params, 3.0), spec=SPEC)
        cfg = DpSgdConfig(q=0.5, eta=0.7, sigma=0.0, clip_c=0.25)
        updated = dp_sgd_step(params, data, cfg, RngStream(seed=2))
        assert np.linalg.norm(updated.theta - params.theta) <= cfg.eta * cfg.clip_c * (1 + 1e-9)

    def test_empty_dataset(self):
        data = SampleSet(features=np.empty((0, 3)), labels=np.empty(0, dtype=int))
        with pytest.raises(TrainingError):
            dp_sgd_step(init_params(SPEC, seed=0), data, DpSgdConfig(q=0.5, eta=0.1, sigma=1.0, clip_c=1.0), RngStream(seed=0))

    @pytest.mark.parametrize(
        "overrides",
        [{"q": 0.0}, {"q": 1.5}, {"eta": 0.0}, {"sigma": -1.0}, {"clip_c": 0.0}, {"eta": float("nan")}],
    )
    def test_config_validation(self, overrides):
        values = {"q": 0.5, "eta": 0.1, "sigma": 1.0, "clip_c": 1.0, **overrides}
        with pytest.raises(ValidationError):
            DpSgdConfig(**values)
