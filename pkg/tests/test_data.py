"""
Expression data tests: feature selection, imputation, splits and synthesis.
"""
import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st
from pydantic import ValidationError

from app.core.exceptions import ClassTooSmallError, DataError, EmptySelectionError, MissingValuesError
from app.services.classifier import ModelParams, evaluate_accuracy, per_sample_gradients
from app.services.data import (
    ExpressionMatrix,
    GeneSignature,
    SplitSpec,
    holdout_split,
    impute_zeros,
    largest_remainder_sizes,
    select_features,
    stratified_split,
    synthesize_dataset,
)
from app.services.models.base import ArchitectureSpec, ModelKind


def _fit_without_noise(matrix: ExpressionMatrix, steps: int = 200, eta: float = 0.5) -> ModelParams:
    samples = matrix.to_samples(keep_ids=False)
    spec = ArchitectureSpec(kind=ModelKind.LOGISTIC_REGRESSION, input_dim=matrix.n_genes)
    params = ModelParams(theta=np.zeros(spec.n_params), spec=spec)
    for _ in range(steps):
        step = per_sample_gradients(params, samples.features, samples.labels).mean(axis=0)
        params = ModelParams(theta=params.theta - eta * step, spec=spec)
    return params


def _labelled(n_normal: int, n_tumor: int, n_genes: int = 1) -> ExpressionMatrix:
    labels = np.array([0] * n_normal + [1] * n_tumor)
    values = np.arange(labels.size * n_genes, dtype=float).reshape(labels.size, n_genes)
    return ExpressionMatrix(values=values, gene_names=tuple(f"G{i}" for i in range(n_genes)), labels=labels)


class TestMatrix:
    def test_defaults_sample_ids_to_rows(self):
        assert _labelled(2, 3).sample_ids == (0, 1, 2, 3, 4)

    def test_rejects_bad_labels(self):
        with pytest.raises(DataError):
            ExpressionMatrix(values=np.zeros((2, 1)), gene_names=("A",), labels=np.array([0, 2]))

    def test_rejects_duplicate_genes(self):
        with pytest.raises(DataError):
            ExpressionMatrix(values=np.zeros((1, 2)), gene_names=("A", "A"), labels=np.array([1]))

    def test_missing_values_block_training(self):
        matrix = ExpressionMatrix(values=np.array([[np.nan, 1.0]]), gene_names=("A", "B"), labels=np.array([1]))
        with pytest.raises(MissingValuesError):
            matrix.to_samples()

    def test_class_counts(self):
        assert _labelled(4, 9).class_counts() == (4, 9)


class TestFeatureSelection:
    def test_keeps_signature_order(self):
        matrix = ExpressionMatrix(
            values=np.array([[1.0, 2.0, 3.0]]), gene_names=("A", "B", "C"), labels=np.array([0])
        )
        selected = select_features(matrix, GeneSignature(name="s", genes=("C", "X", "A")))
        assert selected.gene_names == ("C", "A")
        np.testing.assert_array_equal(selected.values, [[3.0, 1.0]])

    def test_partial_overlap_counts(self):
        signature = GeneSignature(name="published", genes=tuple(f"S{i}" for i in range(89)))
        genes = tuple(f"S{i}" for i in range(69)) + tuple(f"F{i}" for i in range(31))
        matrix = ExpressionMatrix(values=np.zeros((3, 100)), gene_names=genes, labels=np.array([0, 1, 1]))
        assert select_features(matrix, signature).n_genes == 69

    def test_matching_is_case_sensitive(self):
        matrix = ExpressionMatrix(values=np.zeros((1, 1)), gene_names=("tp53",), labels=np.array([1]))
        with pytest.raises(EmptySelectionError):
            select_features(matrix, GeneSignature(name="s", genes=("TP53",)))

    def test_idempotent(self):
        matrix = synthesize_dataset(3, 4, 10, GeneSignature(name="s", genes=("A", "B")), 1.0, 0.0, seed=0)
        signature = GeneSignature(name="s", genes=("B", "GENE00003", "A"))
        once = select_features(matrix, signature)
        assert select_features(once, signature) == once

    def test_signature_validation(self):
        with pytest.raises(ValidationError):
            GeneSignature(name="s", genes=())
        with pytest.raises(ValidationError):
            GeneSignature(name="s", genes=("A", "A"))


class TestImputation:
    def test_missing_become_zero(self):
        matrix = ExpressionMatrix(
            values=np.array([[np.nan, 2.0], [3.0, np.nan]]), gene_names=("A", "B"), labels=np.array([0, 1])
        )
        imputed = impute_zeros(matrix)
        np.testing.assert_array_equal(imputed.values, [[0.0, 2.0], [3.0, 0.0]])
        assert not imputed.missing.any()

    def test_present_entries_untouched(self):
        matrix = _labelled(2, 2, n_genes=3)
        assert impute_zeros(matrix) == matrix


class TestSplits:
    def test_largest_remainder(self):
        assert largest_remainder_sizes(61, [0.9, 0.1]) == [55, 6]
        assert largest_remainder_sizes(529, [0.9, 0.1]) == [476, 53]
        assert largest_remainder_sizes(10, [0.5, 0.5]) == [5, 5]
        assert largest_remainder_sizes(5, [0.4, 0.4, 0.2]) == [2, 2, 1]

    def test_stratified_holdout_counts(self):
        train, test = holdout_split(_labelled(61, 529), test_fraction=0.1, seed=0)
        assert test.class_counts() == (6, 53)
        assert train.class_counts() == (55, 476)

    def test_single_part_is_identity(self):
        matrix = _labelled(7, 11, n_genes=2)
        (whole,) = stratified_split(matrix, SplitSpec(fractions=(("all", 1.0),), seed=3))
        assert whole == matrix

    def test_deterministic_and_seed_dependent(self):
        matrix = _labelled(30, 50)
        spec = SplitSpec.default(seed=4)
        first = stratified_split(matrix, spec)
        assert first == stratified_split(matrix, spec)
        other = stratified_split(matrix, SplitSpec.default(seed=5))
        assert [part.sample_ids for part in first] != [part.sample_ids for part in other]

    def test_default_split_names(self):
        assert SplitSpec.default(seed=0).names == ["client1", "client2", "validation"]

    def test_class_too_small(self):
        with pytest.raises(ClassTooSmallError):
            stratified_split(_labelled(2, 10), SplitSpec.default(seed=0))

    @pytest.mark.parametrize("fractions", [(), (("a", 0.5), ("b", 0.4)), (("a", 0.5), ("a", 0.5)), (("a", 1.2), ("b", -0.2))])
    def test_invalid_split_spec(self, fractions):
        with pytest.raises(ValidationError):
            SplitSpec(fractions=fractions)

    @hyp_settings(max_examples=50, deadline=None)
    @given(
        n_normal=st.integers(3, 80),
        n_tumor=st.integers(3, 200),
        weights=st.lists(st.integers(1, 10), min_size=1, max_size=3),
        seed=st.integers(0, 2 ** 31),
    )
    def test_partition_properties(self, n_normal, n_tumor, weights, seed):
        fractions = tuple((f"p{i}", w / sum(weights)) for i, w in enumerate(weights))
        parts = stratified_split(_labelled(n_normal, n_tumor), SplitSpec(fractions=fractions, seed=seed))

        ids = [i for part in parts for i in part.sample_ids]
        assert sorted(ids) == list(range(n_normal + n_tumor))
        for part, (_, fraction) in zip(parts, fractions):
            normal, tumor = part.class_counts()
            assert abs(normal - n_normal * fraction) < 1
            assert abs(tumor - n_tumor * fraction) < 1


class TestSynthesis:
    def test_layout(self):
        signature = GeneSignature(name="s", genes=("X1", "X2"))
        matrix = synthesize_dataset(5, 8, 6, signature, effect_size=1.0, missing_rate=0.0, seed=1)
        assert matrix.gene_names[:2] == ("X1", "X2")
        assert matrix.n_genes == 6
        assert matrix.class_counts() == (5, 8)

    def test_missing_rate(self):
        signature = GeneSignature(name="s", genes=("X1",))
        matrix = synthesize_dataset(500, 500, 100, signature, effect_size=0.0, missing_rate=0.1, seed=2)
        n = matrix.values.size
        standard_error = np.sqrt(0.1 * 0.9 / n)
        assert abs(matrix.missing.mean() - 0.1) < 3 * standard_error

    def test_effect_shifts_tumors(self):
        signature = GeneSignature(name="s", genes=("X1",))
        matrix = synthesize_dataset(400, 400, 2, signature, effect_size=2.0, missing_rate=0.0, seed=3)
        shift = matrix.values[matrix.labels == 1, 0].mean() - matrix.values[matrix.labels == 0, 0].mean()
        assert shift == pytest.approx(2.0, abs=0.3)
        filler = matrix.values[matrix.labels == 1, 1].mean() - matrix.values[matrix.labels == 0, 1].mean()
        assert filler == pytest.approx(0.0, abs=0.3)

    @pytest.mark.parametrize("effect_size, low, high", [(0.0, 0.35, 0.65), (3.0, 0.95, 1.0)])
    def test_effect_size_sets_learnability(self, effect_size, low, high):
        signature = GeneSignature(name="s", genes=tuple(f"S{i}" for i in range(69)))
        train, test = (
            synthesize_dataset(100, 100, 100, signature, effect_size=effect_size, missing_rate=0.0, seed=seed)
            for seed in (0, 1)
        )
        accuracy = evaluate_accuracy(_fit_without_noise(train), test.to_samples(keep_ids=False))
        assert low <= accuracy <= high

    def test_deterministic(self):
        signature = GeneSignature(name="s", genes=("X1",))
        args = (10, 10, 5, signature, 1.0, 0.2)
        assert synthesize_dataset(*args, seed=9) == synthesize_dataset(*args, seed=9)

    @pytest.mark.parametrize(
        "kwargs",
        [{"n_normal": 0}, {"n_genes": 1}, {"missing_rate": 1.0}],
    )
    def test_invalid_arguments(self, kwargs):
        values = {
            "n_normal": 5, "n_tumor": 5, "n_genes": 4, "effect_size": 1.0, "missing_rate": 0.0, "seed": 0,
            "signal_genes": GeneSignature(name="s", genes=("X1", "X2")), **kwargs,
        }
        with pytest.raises(DataError):
            synthesize_dataset(**values)
