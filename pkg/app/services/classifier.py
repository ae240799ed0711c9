"""
Classifier Service
Parameter containers, forward pass, per-sample gradients and the accuracy metric
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import DimensionMismatchError, EmptyEvaluationError, ModelError
from app.services.models.base import ArchitectureSpec, BaseClassifier, ModelKind
from app.services.models.logistic_regression import LogisticRegression
from app.services.models.shallow_mlp import ShallowMlp

# Keeps predict_proba strictly inside (0, 1) once expit saturates
_PROBABILITY_FLOOR = 1e-15


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Flat parameter vector plus the architecture it belongs to (read-only)"""
    theta: np.ndarray
    spec: ArchitectureSpec

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 1 or theta.size != self.spec.n_params:
            raise DimensionMismatchError(
                f"{self.spec.kind.value} with input_dim={self.spec.input_dim} needs "
                f"{self.spec.n_params} parameters, got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise ModelError("Model parameters must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.theta, other.theta)

    __hash__ = None


@dataclass(frozen=True)
class LabeledSample:
    """One sample: features and label (0 = normal, 1 = tumor)"""
    features: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class SampleSet:
    """
    Feature matrix with labels, ready for training.

    sample_ids identify rows of the source matrix and let the federated
    simulator check that client datasets are disjoint.
    """
    features: np.ndarray
    labels: np.ndarray
    sample_ids: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        labels = np.array(self.labels, dtype=int)
        if features.ndim != 2:
            raise DimensionMismatchError(f"Features must be a matrix, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise DimensionMismatchError(f"{features.shape[0]} samples but labels of shape {labels.shape}")
        if not np.all(np.isin(labels, (0, 1))):
            raise ModelError("Labels must be 0 or 1")
        if not np.all(np.isfinite(features)):
            raise ModelError("Features must be finite")
        if self.sample_ids is not None and len(self.sample_ids) != features.shape[0]:
            raise DimensionMismatchError("sample_ids must have one entry per sample")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion matrix"""
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ModelError("Confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def get_classifier(spec: ArchitectureSpec) -> BaseClassifier:
    """
    Get the classifier implementation for an architecture

    Args:
        spec: Architecture descriptor

    Returns:
        Classifier instance
    """
    if spec.kind == ModelKind.LOGISTIC_REGRESSION:
        return LogisticRegression(spec)
    if spec.kind == ModelKind.SHALLOW_MLP:
        return ShallowMlp(spec)
    raise ModelError(f"No classifier available for {spec.kind}")


def init_params(spec: ArchitectureSpec, seed: int) -> ModelParams:
    """Uniform +-1/sqrt(fan_in) weights, zero biases; a pure function of (spec, seed)"""
    rng = np.random.default_rng(seed)
    return ModelParams(theta=get_classifier(spec).initialize(rng), spec=spec)


def predict_proba(params: ModelParams, features: np.ndarray) -> float:
    """Tumor probability of a single feature vector, strictly inside (0, 1)"""
    row = np.asarray(features, dtype=float)
    if row.ndim != 1:
        raise DimensionMismatchError(f"Expected a feature vector, got shape {row.shape}")
    return float(predict_proba_batch(params, row[None, :])[0])


def predict_proba_batch(params: ModelParams, features: np.ndarray) -> np.ndarray:
    probabilities = get_classifier(params.spec).probabilities(params.theta, features)
    return np.clip(probabilities, _PROBABILITY_FLOOR, 1.0 - _PROBABILITY_FLOOR)


def per_sample_gradient(params: ModelParams, sample: LabeledSample) -> np.ndarray:
    """Binary cross-entropy gradient of one sample, same length as theta"""
    row = np.asarray(sample.features, dtype=float)
    if row.ndim != 1:
        raise DimensionMismatchError(f"Expected a feature vector, got shape {row.shape}")
    return per_sample_gradients(params, row[None, :], np.array([sample.label]))[0]


def per_sample_gradients(params: ModelParams, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Row i is the gradient of sample i, shape (n, n_params)"""
    return get_classifier(params.spec).per_sample_gradients(params.theta, features, labels)


def loss(params: ModelParams, samples: SampleSet) -> float:
    """Mean binary cross-entropy"""
    return float(np.mean(get_classifier(params.spec).losses(params.theta, samples.features, samples.labels)))


def confusion_counts(
    params: ModelParams,
    samples: SampleSet,
    threshold: Optional[float] = None,
) -> ConfusionCounts:
    """Predict tumor when the probability reaches the threshold"""
    threshold = settings.CLASSIFICATION_THRESHOLD if threshold is None else threshold
    predicted = predict_proba_batch(params, samples.features) >= threshold
    actual = samples.labels == 1
    return ConfusionCounts(
        tp=int(np.sum(predicted & actual)),
        tn=int(np.sum(~predicted & ~actual)),
        fp=int(np.sum(predicted & ~actual)),
        fn=int(np.sum(~predicted & actual)),
    )


def accuracy(counts: ConfusionCounts) -> float:
    """(TP + TN) / (TP + TN + FP + FN)"""
    if counts.total == 0:
        raise EmptyEvaluationError("Accuracy is undefined on an empty evaluation set")
    return (counts.tp + counts.tn) / counts.total


def evaluate_accuracy(params: ModelParams, samples: SampleSet) -> float:
    return accuracy(confusion_counts(params, samples))

