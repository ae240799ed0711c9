"""
Experiment Harness
Multi-seed repetition, grid search over hyperparameters, budget-driven
hyperparameter selection and plot-data emission.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from app.core.config import settings
from app.core.exceptions import (
    BudgetViolationError,
    DataError,
    DpFlError,
    ExperimentFailedError,
    GridSearchError,
    HarnessError,
)
from app.services.accountant import AlphaGrid, DpPoint
from app.services.classifier import evaluate_accuracy
from app.services.data import (
    ExpressionMatrix,
    GeneSignature,
    SplitSpec,
    impute_zeros,
    select_features,
    stratified_split,
)
from app.services.federated import dp_sgd_budget, run_cyclic_fl
from app.services.frontier import (
    BudgetTarget,
    FrontierRecord,
    HyperParams,
    PlotRow,
    plot_rows,
    select_params,
    sort_records,
)
from app.utils.file_handler import load_matrix, load_signature
from app.utils.frontier_store import ensure_writable, read_frontier, write_frontier, write_plot_data

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ProgressCallback = Callable[[int, int], None]


@dataclass(frozen=True)
class ExperimentDataset:
    """
    Labeled matrix plus the public signatures grid points refer to by name.

    Source paths are kept when the dataset came from files so that grid
    points can be shipped to Celery workers by reference.
    """
    matrix: ExpressionMatrix
    signatures: Dict[str, GeneSignature]
    matrix_path: Optional[str] = None
    signature_paths: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_files(cls, matrix_path: PathLike, signature_paths: Sequence[PathLike]) -> "ExperimentDataset":
        signatures = {}
        paths = {}
        for path in signature_paths:
            signature = load_signature(path)
            signatures[signature.name] = signature
            paths[signature.name] = str(path)
        return cls(
            matrix=load_matrix(matrix_path),
            signatures=signatures,
            matrix_path=str(matrix_path),
            signature_paths=paths,
        )

    def signature(self, name: str) -> GeneSignature:
        if name not in self.signatures:
            raise DataError(f"Unknown signature '{name}'; loaded: {', '.join(self.signatures) or 'none'}")
        return self.signatures[name]

    @property
    def distributable(self) -> bool:
        return self.matrix_path is not None and set(self.signature_paths) == set(self.signatures)


@dataclass(frozen=True)
class BudgetRun:
    """Outcome of training for a budget target"""
    accuracy: float
    std_accuracy: float
    budget: DpPoint
    hyperparams: HyperParams
    selected: FrontierRecord


def _prepare(part: ExpressionMatrix, signature: GeneSignature) -> ExpressionMatrix:
    return impute_zeros(select_features(part, signature))


def seed_accuracy(hp: HyperParams, dataset: ExperimentDataset, seed: int, delta: float) -> float:
    """
    One seed of the training protocol.

    Stratified client1 / client2 / validation split, per-part signature
    selection and zero imputation, cyclic training, validation accuracy.
    """
    spec = SplitSpec.default(seed)
    if len(spec.fractions) != 3:
        raise HarnessError(f"Split must have client1, client2 and validation parts, got {spec.names}")
    signature = dataset.signature(hp.signature)
    client1, client2, validation = (
        _prepare(part, signature) for part in stratified_split(dataset.matrix, spec)
    )
    cfg = hp.fl_config(input_dim=client1.n_genes, master_seed=seed)
    result = run_cyclic_fl(cfg, client1.to_samples(), client2.to_samples(), delta)
    return evaluate_accuracy(result.final_params, validation.to_samples())


def _seed_outcome(hp: HyperParams, dataset: ExperimentDataset, seed: int, delta: float) -> Union[float, str]:
    try:
        return seed_accuracy(hp, dataset, seed, delta)
    except (DpFlError, ValueError) as exc:
        return str(exc)


def _map_seeds(
    jobs: Sequence[Tuple[HyperParams, int]],
    dataset: ExperimentDataset,
    delta: float,
    n_jobs: int,
) -> Iterator[Union[float, str]]:
    """Parallel map over (grid point, seed) jobs; outcomes are yielded in job order"""
    return Parallel(n_jobs=n_jobs, return_as="generator")(
        delayed(_seed_outcome)(hp, dataset, seed, delta) for hp, seed in jobs
    )


def _gather(hp: HyperParams, seeds: range, outcomes: Iterator[Union[float, str]]) -> np.ndarray:
    """Take one outcome per seed off the stream, in seed order"""
    accuracies = []
    failures: List[Tuple[int, str]] = []
    for seed, outcome in zip(seeds, outcomes):
        if isinstance(outcome, str):
            logger.warning(f"Seed {seed} failed for {hp.model_dump(mode='json')}: {outcome}")
            failures.append((seed, outcome))
        else:
            accuracies.append(outcome)
    if failures:
        raise ExperimentFailedError(failures)
    return np.array(accuracies)


def _check_repetitions(n_seeds: int, deltas: Sequence[float]) -> None:
    if n_seeds < 1:
        raise HarnessError(f"n_seeds must be >= 1, got {n_seeds}")
    if not deltas:
        raise HarnessError("Delta grid must contain at least one value")


def _record(hp: HyperParams, accuracies: np.ndarray, budget: DpPoint) -> FrontierRecord:
    return FrontierRecord(
        **hp.model_dump(),
        epsilon=budget.epsilon,
        delta=budget.delta,
        mean_accuracy=float(np.mean(accuracies)),
        std_accuracy=float(np.std(accuracies)),
        n_seeds=int(accuracies.size),
    )


def _point_records(
    hp: HyperParams,
    accuracies: np.ndarray,
    deltas: Sequence[float],
    grid: Optional[AlphaGrid],
) -> List[FrontierRecord]:
    # Accounting is data-independent: the seeds are trained once, only the conversion repeats per delta
    if hp.sigma == 0.0:
        logger.warning(f"Grid point {hp.model_dump(mode='json')} is non-private; reporting epsilon=inf")
    return [_record(hp, accuracies, dp_sgd_budget(hp.dp_config(), hp.total_steps, delta, grid)) for delta in deltas]


def evaluate_point(
    hp: HyperParams,
    dataset: ExperimentDataset,
    n_seeds: int,
    base_seed: int,
    deltas: Sequence[float],
    grid: Optional[AlphaGrid] = None,
    n_jobs: Optional[int] = None,
) -> List[FrontierRecord]:
    """
    Frontier records of one grid point, one per delta.

    Seeds run in parallel (joblib, settings.N_JOBS workers by default) and
    are gathered in seed order, so the records do not depend on n_jobs.
    """
    _check_repetitions(n_seeds, deltas)
    n_jobs = settings.N_JOBS if n_jobs is None else n_jobs
    seeds = range(base_seed, base_seed + n_seeds)
    outcomes = _map_seeds([(hp, seed) for seed in seeds], dataset, deltas[0], n_jobs)
    return _point_records(hp, _gather(hp, seeds, outcomes), deltas, grid)


def repeat_runs(
    hp: HyperParams,
    dataset: ExperimentDataset,
    n_seeds: Optional[int] = None,
    base_seed: Optional[int] = None,
    delta: Optional[float] = None,
    grid: Optional[AlphaGrid] = None,
    n_jobs: Optional[int] = None,
) -> FrontierRecord:
    """
    Train with seeds base_seed .. base_seed + n_seeds - 1

    Args:
        hp: Grid point
        dataset: Matrix and signatures
        n_seeds: Repetitions (settings default)
        base_seed: First seed (settings default)
        delta: Per-client failure probability (settings default)
        grid: Renyi orders
        n_jobs: Parallel seed workers (settings default)

    Returns:
        FrontierRecord with the mean and population std of validation accuracy

    Raises:
        ExperimentFailedError: any seed failed
    """
    n_seeds = settings.N_SEEDS if n_seeds is None else n_seeds
    base_seed = settings.BASE_SEED if base_seed is None else base_seed
    delta = settings.DEFAULT_DELTA if delta is None else delta
    return evaluate_point(hp, dataset, n_seeds, base_seed, [delta], grid, n_jobs)[0]


def _evaluate_distributed(
    grid: Sequence[HyperParams],
    dataset: ExperimentDataset,
    n_seeds: int,
    base_seed: int,
    deltas: Sequence[float],
    on_progress: Optional[ProgressCallback] = None,
) -> List[Union[List[FrontierRecord], str]]:
    """Fan grid points out as a Celery group; results are collected in grid order"""
    from celery import group

    from app.tasks.experiment_tasks import evaluate_grid_point

    job = group(
        evaluate_grid_point.s(
            hp.model_dump(mode="json"),
            dataset.matrix_path,
            dataset.signature_paths,
            n_seeds,
            base_seed,
            list(deltas),
        )
        for hp in grid
    )
    outcomes = []
    for index, result in enumerate(job.apply_async().results):
        # the search itself may run inside a worker task
        payload = result.get(propagate=False, disable_sync_subtasks=False)
        if isinstance(payload, dict) and "records" in payload:
            outcomes.append([FrontierRecord.model_validate(item) for item in payload["records"]])
        elif isinstance(payload, dict):
            outcomes.append(payload.get("error", "unknown failure"))
        else:
            outcomes.append(str(payload))
        logger.info(f"Grid point {index + 1}/{len(grid)} finished")
        if on_progress is not None:
            on_progress(index + 1, len(grid))
    return outcomes


def _evaluate_local(
    grid: Sequence[HyperParams],
    dataset: ExperimentDataset,
    n_seeds: int,
    base_seed: int,
    deltas: Sequence[float],
    alpha_grid: Optional[AlphaGrid],
    n_jobs: int,
    on_progress: Optional[ProgressCallback] = None,
) -> List[Union[List[FrontierRecord], str]]:
    """One joblib map over every (point, seed) pair, consumed point by point in grid order"""
    seeds = range(base_seed, base_seed + n_seeds)
    stream = _map_seeds([(hp, seed) for hp in grid for seed in seeds], dataset, deltas[0], n_jobs)
    outcomes = []
    for index, hp in enumerate(grid):
        try:
            outcomes.append(_point_records(hp, _gather(hp, seeds, stream), deltas, alpha_grid))
        except (DpFlError, ValueError) as exc:
            outcomes.append(str(exc))
        logger.info(f"Grid point {index + 1}/{len(grid)} finished")
        if on_progress is not None:
            on_progress(index + 1, len(grid))
    return outcomes


def grid_search(
    grid: Sequence[HyperParams],
    dataset: ExperimentDataset,
    n_seeds: Optional[int] = None,
    base_seed: Optional[int] = None,
    out_path: Optional[PathLike] = None,
    deltas: Optional[Sequence[float]] = None,
    alpha_grid: Optional[AlphaGrid] = None,
    distribute: Optional[bool] = None,
    on_progress: Optional[ProgressCallback] = None,
    n_jobs: Optional[int] = None,
) -> List[FrontierRecord]:
    """
    Evaluate every grid point and write the frontier CSV

    Points and seeds run in parallel, either in-process over joblib workers
    or as Celery tasks; outcomes are gathered in grid order so the CSV is the
    same for any degree of parallelism.

    Args:
        grid: Grid points
        dataset: Matrix and signatures
        n_seeds: Repetitions per point (settings default)
        base_seed: First seed (settings default)
        out_path: Frontier CSV (settings default)
        deltas: Delta grid attached to records (settings default)
        alpha_grid: Renyi orders
        distribute: Send points to Celery workers (settings default)
        on_progress: Called with (points done, points total)
        n_jobs: In-process joblib workers (settings default)

    Returns:
        Records sorted by (delta, epsilon)

    Raises:
        GridSearchError: some points failed; the others were still written
    """
    if not grid:
        raise HarnessError("Grid must contain at least one point")
    n_seeds = settings.N_SEEDS if n_seeds is None else n_seeds
    base_seed = settings.BASE_SEED if base_seed is None else base_seed
    deltas = settings.delta_grid_list if deltas is None else list(deltas)
    _check_repetitions(n_seeds, deltas)
    out_path = ensure_writable(settings.frontier_path if out_path is None else out_path)
    distribute = settings.DISTRIBUTE_GRID_POINTS if distribute is None else distribute
    n_jobs = settings.N_JOBS if n_jobs is None else n_jobs

    if distribute and dataset.distributable:
        outcomes = _evaluate_distributed(grid, dataset, n_seeds, base_seed, deltas, on_progress)
    else:
        outcomes = _evaluate_local(grid, dataset, n_seeds, base_seed, deltas, alpha_grid, n_jobs, on_progress)

    records: List[FrontierRecord] = []
    failures: List[Tuple[int, str]] = []
    for index, outcome in enumerate(outcomes):
        if isinstance(outcome, str):
            failures.append((index, outcome))
        else:
            records.extend(outcome)

    records = sort_records(records)
    write_frontier(records, out_path)
    if failures:
        raise GridSearchError(failures, records)
    return records


def run_from_budget(
    target: BudgetTarget,
    frontier_path: PathLike,
    dataset: ExperimentDataset,
    n_seeds: Optional[int] = None,
    base_seed: Optional[int] = None,
    grid: Optional[AlphaGrid] = None,
) -> BudgetRun:
    """
    Select the frontier record for a target and train it again

    Raises:
        NoFeasibleConfigurationError: nothing in the frontier meets the target
        BudgetViolationError: the re-run's budget exceeds the target
    """
    selected = select_params(read_frontier(frontier_path), target)
    hp = selected.hyperparams
    record = repeat_runs(
        hp,
        dataset,
        n_seeds=selected.n_seeds if n_seeds is None else n_seeds,
        base_seed=base_seed,
        delta=selected.delta,
        grid=grid,
    )
    budget = DpPoint(epsilon=record.epsilon, delta=record.delta)
    if not target.admits(budget.epsilon, budget.delta):
        raise BudgetViolationError(
            f"Realized budget ({budget.epsilon}, {budget.delta}) exceeds target "
            f"({target.epsilon_t}, {target.delta_t})"
        )
    return BudgetRun(
        accuracy=record.mean_accuracy,
        std_accuracy=record.std_accuracy,
        budget=budget,
        hyperparams=hp,
        selected=selected,
    )


def emit_plot_data(
    records: Sequence[FrontierRecord],
    deltas: Optional[Sequence[float]] = None,
    out_path: Optional[PathLike] = None,
    epsilon_grid: Optional[Sequence[float]] = None,
) -> List[PlotRow]:
    """Best feasible accuracy per (delta, epsilon, signature), written as CSV when out_path is given"""
    rows = plot_rows(records, deltas, epsilon_grid)
    if out_path is not None:
        write_plot_data(rows, out_path)
    return rows
