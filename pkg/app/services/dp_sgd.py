"""
DP-SGD Step
Poisson batch sampling, per-sample clipping, Gaussian noising and averaged descent
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.exceptions import NonFiniteGradientError, TrainingError
from app.services.classifier import ModelParams, SampleSet, per_sample_gradients

logger = logging.getLogger(__name__)

# Sub-stream keys: batch sampling and noise never share draws
BATCH_STREAM = 0
NOISE_STREAM = 1

# Rounding slack for the post-clip norm check
_CLIP_SLACK = 1e-9


class DpSgdConfig(BaseModel):
    """Hyperparameters of one DP-SGD step"""
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    q: float = Field(..., gt=0.0, le=1.0, description="Poisson sampling rate")
    eta: float = Field(..., gt=0.0, description="Learning rate")
    sigma: float = Field(..., ge=0.0, description="Noise multiplier (0 = non-private test mode)")
    clip_c: float = Field(..., gt=0.0, description="Per-sample L2 gradient bound")


@dataclass(frozen=True)
class RngStream:
    """
    Reproducible random stream keyed by (seed, key path).

    Identical (seed, keys) always give the identical draw sequence; distinct
    key paths give independent streams.
    """
    seed: int
    keys: Tuple[int, ...] = ()

    def child(self, *keys: int) -> "RngStream":
        return RngStream(seed=self.seed, keys=self.keys + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=self.keys))


def poisson_sample(n: int, q: float, rng: RngStream) -> np.ndarray:
    """Indices of a batch where every sample is kept independently with probability q"""
    if n < 1:
        raise TrainingError(f"Dataset size must be >= 1, got {n}")
    draws = rng.child(BATCH_STREAM).generator().random(n)
    return np.flatnonzero(draws < q)


def clip_gradient(g: np.ndarray, clip_c: float) -> np.ndarray:
    """g / max(1, ||g||_2 / C)"""
    if not clip_c > 0.0:
        raise TrainingError(f"clip_c must be > 0, got {clip_c}")
    g = np.asarray(g, dtype=float)
    return g / max(1.0, float(np.linalg.norm(g)) / clip_c)


def clip_gradients(gradients: np.ndarray, clip_c: float) -> np.ndarray:
    """Row-wise clip_gradient"""
    norms = np.linalg.norm(gradients, axis=1)
    return gradients / np.maximum(1.0, norms / clip_c)[:, None]


def dp_sgd_step(params: ModelParams, data: SampleSet, cfg: DpSgdConfig, rng: RngStream) -> ModelParams:
    """
    One DP-SGD update.

    Noise N(0, sigma^2 C^2 I) is added to the sum of clipped gradients and the
    result is divided by the realized batch size. An empty batch leaves the
    parameters unchanged (the step is still charged by the accountant).

    Args:
        params: Current parameters
        data: Local dataset
        cfg: Step hyperparameters
        rng: Stream dedicated to this step

    Returns:
        Updated parameters
    """
    if data.n_samples == 0:
        raise TrainingError("DP-SGD requires a non-empty dataset")

    batch = poisson_sample(data.n_samples, cfg.q, rng)
    if batch.size == 0:
        logger.debug(f"Empty Poisson batch for stream {rng.keys}; parameters unchanged")
        return params

    gradients = per_sample_gradients(params, data.features[batch], data.labels[batch])
    if not np.all(np.isfinite(gradients)):
        raise NonFiniteGradientError(f"Non-finite per-sample gradient in stream {rng.keys}")

    clipped = clip_gradients(gradients, cfg.clip_c)
    if __debug__:
        assert np.all(np.linalg.norm(clipped, axis=1) <= cfg.clip_c * (1.0 + _CLIP_SLACK))

    noise = rng.child(NOISE_STREAM).generator().standard_normal(params.theta.size) * (cfg.sigma * cfg.clip_c)
    noisy_mean = (clipped.sum(axis=0) + noise) / batch.size
    return ModelParams(theta=params.theta - cfg.eta * noisy_mean, spec=params.spec)
