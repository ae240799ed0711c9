"""
Base Classifier Interface
Abstract base class for the binary classifiers trained with DP-SGD
"""
from abc import ABC, abstractmethod
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit

from app.core.config import settings
from app.core.exceptions import DimensionMismatchError


class ModelKind(str, Enum):
    """Supported architectures"""
    LOGISTIC_REGRESSION = "logistic_regression"
    SHALLOW_MLP = "shallow_mlp"


class ArchitectureSpec(BaseModel):
    """Architecture descriptor: kind plus layer widths"""
    model_config = ConfigDict(frozen=True)

    kind: ModelKind = Field(..., description="Model family")
    input_dim: int = Field(..., ge=1, description="Feature count")
    hidden_dim: Optional[int] = Field(None, ge=1, description="Hidden units (MLP only)")

    @model_validator(mode="before")
    @classmethod
    def _hidden_width(cls, data):
        if not isinstance(data, dict):
            return data
        kind = ModelKind(data.get("kind"))
        if kind == ModelKind.SHALLOW_MLP and data.get("hidden_dim") is None:
            data = {**data, "hidden_dim": settings.MLP_HIDDEN_DIM}
        elif kind == ModelKind.LOGISTIC_REGRESSION:
            data = {**data, "hidden_dim": None}
        return data

    @property
    def n_params(self) -> int:
        """Weights plus biases implied by the architecture"""
        if self.kind == ModelKind.LOGISTIC_REGRESSION:
            return self.input_dim + 1
        return self.input_dim * self.hidden_dim + 2 * self.hidden_dim + 1


class BaseClassifier(ABC):
    """
    Stateless sigmoid classifier over a flat parameter vector.

    Subclasses provide the logit and its Jacobian with respect to theta;
    the binary cross-entropy gradient is shared: (p - y) * d logit / d theta.
    """

    def __init__(self, spec: ArchitectureSpec):
        self.spec = spec

    @abstractmethod
    def initialize(self, rng: np.random.Generator) -> np.ndarray:
        """
        Draw initial parameters

        Args:
            rng: Seeded generator

        Returns:
            Flat parameter vector of length spec.n_params
        """
        pass

    @abstractmethod
    def logits(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        """Logits for a (n, input_dim) feature matrix"""
        pass

    @abstractmethod
    def logit_jacobian(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        """Per-sample gradient of the logit, shape (n, n_params)"""
        pass

    def validate_input(self, features: np.ndarray) -> np.ndarray:
        """
        Validate feature matrix shape against the architecture

        Args:
            features: (n, input_dim) matrix

        Returns:
            The features as a float array
        """
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[1] != self.spec.input_dim:
            raise DimensionMismatchError(
                f"Expected features of width {self.spec.input_dim}, got shape {features.shape}"
            )
        return features

    def probabilities(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        return expit(self.logits(theta, self.validate_input(features)))

    def per_sample_gradients(self, theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Binary cross-entropy gradient of every sample, shape (n, n_params)"""
        features = self.validate_input(features)
        residual = expit(self.logits(theta, features)) - np.asarray(labels, dtype=float)
        return residual[:, None] * self.logit_jacobian(theta, features)

    def losses(self, theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Binary cross-entropy per sample, computed from logits"""
        z = self.logits(theta, self.validate_input(features))
        return np.logaddexp(0.0, z) - np.asarray(labels, dtype=float) * z
