"""
Shallow MLP
One relu hidden layer followed by a sigmoid output unit.

theta layout: [W1 (hidden x input, row-major), b1 (hidden), w2 (hidden), b2]
"""
from typing import Tuple

import numpy as np

from .base import BaseClassifier


class ShallowMlp(BaseClassifier):
    """Single-hidden-layer perceptron"""

    def _unpack(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        d, h = self.spec.input_dim, self.spec.hidden_dim
        w1 = theta[: d * h].reshape(h, d)
        b1 = theta[d * h: d * h + h]
        w2 = theta[d * h + h: d * h + 2 * h]
        return w1, b1, w2, theta[-1]

    def initialize(self, rng: np.random.Generator) -> np.ndarray:
        d, h = self.spec.input_dim, self.spec.hidden_dim
        w1 = rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=(h, d))
        w2 = rng.uniform(-1.0 / np.sqrt(h), 1.0 / np.sqrt(h), size=h)
        return np.concatenate([w1.ravel(), np.zeros(h), w2, [0.0]])

    def logits(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        w1, b1, w2, b2 = self._unpack(theta)
        hidden = np.maximum(features @ w1.T + b1, 0.0)
        return hidden @ w2 + b2

    def logit_jacobian(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        w1, b1, w2, _ = self._unpack(theta)
        pre = features @ w1.T + b1
        hidden = np.maximum(pre, 0.0)
        # d logit / d pre-activation, zero where the unit is inactive
        upstream = np.where(pre > 0.0, w2, 0.0)
        n = features.shape[0]
        d_w1 = (upstream[:, :, None] * features[:, None, :]).reshape(n, -1)
        return np.hstack([d_w1, upstream, hidden, np.ones((n, 1))])
