"""
Expression Data Service
Dataset types, public-signature feature selection, zero imputation,
stratified splitting and synthetic data generation.

Missing entries are NaN from load time until impute_zeros; nothing here
computes a statistic across samples.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.config import settings
from app.core.exceptions import (
    ClassTooSmallError,
    DataError,
    DuplicateGeneError,
    EmptySelectionError,
    MissingValuesError,
    UnknownLabelError,
)
from app.services.classifier import SampleSet
from app.services.dp_sgd import RngStream

logger = logging.getLogger(__name__)

FILLER_GENE_FORMAT = "GENE{:05d}"


@dataclass(frozen=True, eq=False)
class ExpressionMatrix:
    """
    Samples x genes expression values with per-sample labels.

    values holds NaN where an entry is missing. sample_ids are the row
    positions in the originally loaded matrix and survive every subset.
    """
    values: np.ndarray
    gene_names: Tuple[str, ...]
    labels: np.ndarray
    sample_ids: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        labels = np.array(self.labels, dtype=int)
        gene_names = tuple(self.gene_names)
        if values.ndim != 2:
            raise DataError(f"Expression values must be a matrix, got shape {values.shape}")
        if labels.shape != (values.shape[0],):
            raise DataError(f"{values.shape[0]} samples but {labels.size} labels")
        if len(gene_names) != values.shape[1]:
            raise DataError(f"{values.shape[1]} columns but {len(gene_names)} gene names")
        if len(set(gene_names)) != len(gene_names):
            raise DuplicateGeneError("Gene names must be unique")
        if not np.all(np.isin(labels, (0, 1))):
            raise UnknownLabelError("Labels must be 0 or 1")
        if np.any(np.isinf(values)):
            raise DataError("Expression values must be finite")
        sample_ids = tuple(range(values.shape[0])) if self.sample_ids is None else tuple(self.sample_ids)
        if len(sample_ids) != values.shape[0]:
            raise DataError("sample_ids must have one entry per sample")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "gene_names", gene_names)
        object.__setattr__(self, "sample_ids", sample_ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExpressionMatrix):
            return NotImplemented
        return (
            self.gene_names == other.gene_names
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_genes(self) -> int:
        return self.values.shape[1]

    @property
    def missing(self) -> np.ndarray:
        """Boolean mask of missing entries"""
        return np.isnan(self.values)

    def class_counts(self) -> Tuple[int, int]:
        """(normal, tumor) sample counts"""
        return int(np.sum(self.labels == 0)), int(np.sum(self.labels == 1))

    def take(self, rows: Sequence[int]) -> "ExpressionMatrix":
        rows = np.asarray(rows, dtype=int)
        return ExpressionMatrix(
            values=self.values[rows],
            gene_names=self.gene_names,
            labels=self.labels[rows],
            sample_ids=tuple(self.sample_ids[i] for i in rows),
        )

    def to_samples(self, keep_ids: bool = True) -> SampleSet:
        """
        Training view; missing entries must be imputed first.

        keep_ids=False drops the row ids, for matrices loaded from separate
        files whose ids are not comparable.
        """
        if np.any(self.missing):
            raise MissingValuesError(f"{int(self.missing.sum())} missing entries; impute before training")
        return SampleSet(features=self.values, labels=self.labels, sample_ids=self.sample_ids if keep_ids else None)


class GeneSignature(BaseModel):
    """Published gene list used for feature selection"""
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    genes: Tuple[str, ...]

    @field_validator("genes")
    @classmethod
    def _check_genes(cls, genes: Tuple[str, ...]) -> Tuple[str, ...]:
        if not genes:
            raise ValueError("signature must contain at least one gene")
        if len(set(genes)) != len(genes):
            raise ValueError("signature gene names must be unique")
        return genes


class SplitSpec(BaseModel):
    """Named part fractions and the shuffling seed"""
    model_config = ConfigDict(frozen=True)

    fractions: Tuple[Tuple[str, float], ...]
    seed: int = 0

    @field_validator("fractions")
    @classmethod
    def _check_fractions(cls, fractions):
        if not fractions:
            raise ValueError("at least one part is required")
        if any(not fraction > 0.0 for _, fraction in fractions):
            raise ValueError("part fractions must be positive")
        if abs(sum(fraction for _, fraction in fractions) - 1.0) > 1e-9:
            raise ValueError("part fractions must sum to 1")
        if len({name for name, _ in fractions}) != len(fractions):
            raise ValueError("part names must be unique")
        return fractions

    @classmethod
    def default(cls, seed: int) -> "SplitSpec":
        """client1 / client2 / validation split from settings (40/40/20)"""
        return cls(fractions=tuple(settings.split_fractions_list), seed=seed)

    @property
    def names(self) -> List[str]:
        return [name for name, _ in self.fractions]


def select_features(matrix: ExpressionMatrix, signature: GeneSignature) -> ExpressionMatrix:
    """
    Keep the signature genes present in the matrix, in signature order.

    Matching is exact and case-sensitive; signature genes absent from the
    matrix are dropped. The retained count is the result's n_genes.
    """
    column_of = {name: index for index, name in enumerate(matrix.gene_names)}
    kept = [gene for gene in signature.genes if gene in column_of]
    if not kept:
        raise EmptySelectionError(f"Signature '{signature.name}' shares no gene with the matrix")
    logger.debug(f"Signature '{signature.name}': {len(kept)} of {len(signature.genes)} genes present")
    return ExpressionMatrix(
        values=matrix.values[:, [column_of[gene] for gene in kept]],
        gene_names=tuple(kept),
        labels=matrix.labels,
        sample_ids=matrix.sample_ids,
    )


def impute_zeros(matrix: ExpressionMatrix) -> ExpressionMatrix:
    """Replace every missing entry with 0.0"""
    return ExpressionMatrix(
        values=np.nan_to_num(matrix.values, nan=0.0),
        gene_names=matrix.gene_names,
        labels=matrix.labels,
        sample_ids=matrix.sample_ids,
    )


def largest_remainder_sizes(n: int, fractions: Sequence[float]) -> List[int]:
    """
    Integer part sizes summing to n.

    Each part gets floor(n * fraction); leftover units go to the largest
    remainders, ties to the earlier part.
    """
    raw = [n * fraction for fraction in fractions]
    sizes = [int(np.floor(value)) for value in raw]
    leftover = n - sum(sizes)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def stratified_split(matrix: ExpressionMatrix, spec: SplitSpec) -> List[ExpressionMatrix]:
    """
    Partition samples into spec.fractions parts, each class independently.

    Within a class the rows are shuffled by a stream keyed (seed, label);
    rows inside a part keep their original order.

    Returns:
        One matrix per part, in spec order
    """
    fractions = [fraction for _, fraction in spec.fractions]
    assignments = [[] for _ in fractions]
    for label in (0, 1):
        rows = np.flatnonzero(matrix.labels == label)
        if rows.size == 0:
            continue
        if rows.size < len(fractions):
            raise ClassTooSmallError(
                f"Class {label} has {rows.size} samples, fewer than the {len(fractions)} requested parts"
            )
        shuffled = RngStream(seed=spec.seed, keys=(label,)).generator().permutation(rows)
        start = 0
        for part, size in enumerate(largest_remainder_sizes(rows.size, fractions)):
            assignments[part].extend(shuffled[start:start + size].tolist())
            start += size
    return [matrix.take(sorted(rows)) for rows in assignments]


def holdout_split(
    matrix: ExpressionMatrix,
    test_fraction: Optional[float] = None,
    seed: int = 0,
) -> Tuple[ExpressionMatrix, ExpressionMatrix]:
    """Stratified (train, test) split made once, before any tuning"""
    test_fraction = settings.HOLDOUT_FRACTION if test_fraction is None else test_fraction
    train, test = stratified_split(
        matrix,
        SplitSpec(fractions=(("train", 1.0 - test_fraction), ("test", test_fraction)), seed=seed),
    )
    return train, test


def synthesize_dataset(
    n_normal: int,
    n_tumor: int,
    n_genes: int,
    signal_genes: GeneSignature,
    effect_size: float,
    missing_rate: float,
    seed: int,
) -> ExpressionMatrix:
    """
    Class-conditional Gaussian expression data.

    Every entry is N(0, 1); tumor samples are shifted by effect_size on the
    signature genes. Columns are the signature genes followed by GENE#####
    fillers; rows are shuffled; each entry goes missing with missing_rate.
    """
    if min(n_normal, n_tumor, n_genes) < 1:
        raise DataError("Sample and gene counts must be >= 1")
    if n_genes < len(signal_genes.genes):
        raise DataError(f"n_genes={n_genes} is smaller than the {len(signal_genes.genes)} signal genes")
    if not 0.0 <= missing_rate < 1.0:
        raise DataError(f"missing_rate must be in [0, 1), got {missing_rate}")

    taken = set(signal_genes.genes)
    fillers = []
    index = 0
    while len(fillers) < n_genes - len(signal_genes.genes):
        name = FILLER_GENE_FORMAT.format(index)
        index += 1
        if name not in taken:
            fillers.append(name)
    gene_names = signal_genes.genes + tuple(fillers)

    rng = np.random.default_rng(seed)
    n = n_normal + n_tumor
    labels = rng.permutation(np.concatenate([np.zeros(n_normal, dtype=int), np.ones(n_tumor, dtype=int)]))
    values = rng.standard_normal((n, n_genes))
    values[:, : len(signal_genes.genes)] += effect_size * labels[:, None]
    values[rng.random((n, n_genes)) < missing_rate] = np.nan
    return ExpressionMatrix(values=values, gene_names=gene_names, labels=labels)
