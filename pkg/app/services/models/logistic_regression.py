"""
Logistic Regression
Linear logit w.x + b; theta = [w (input_dim), b]
"""
import numpy as np

from .base import BaseClassifier


class LogisticRegression(BaseClassifier):
    """Linear logistic regression"""

    def initialize(self, rng: np.random.Generator) -> np.ndarray:
        bound = 1.0 / np.sqrt(self.spec.input_dim)
        weights = rng.uniform(-bound, bound, size=self.spec.input_dim)
        return np.concatenate([weights, [0.0]])

    def logits(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        return features @ theta[:-1] + theta[-1]

    def logit_jacobian(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        return np.hstack([features, np.ones((features.shape[0], 1))])
