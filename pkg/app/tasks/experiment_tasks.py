"""
Celery Tasks for Experiments
Grid points and whole grid searches run as background tasks
"""
import logging
from typing import Dict, List

from celery import Task
from celery.exceptions import SoftTimeLimitExceeded

from app.celery_app import celery_app
from app.core.exceptions import DpFlError, GridSearchError
from app.services.frontier import HyperParams
from app.services.harness import ExperimentDataset, evaluate_point, grid_search
from app.utils.file_handler import get_output_file_path
from app.utils.frontier_store import load_grid_config

logger = logging.getLogger(__name__)


class CallbackTask(Task):
    """
    Custom Task class logging task outcomes
    """
    def on_failure(self, exc, task_id, args, kwargs, einfo):
        """Called when task fails"""
        logger.error(f"Task {task_id} failed: {exc}")
        super().on_failure(exc, task_id, args, kwargs, einfo)

    def on_success(self, retval, task_id, args, kwargs):
        """Called when task succeeds"""
        logger.info(f"Task {task_id} completed successfully")
        super().on_success(retval, task_id, args, kwargs)


def _report_state(task: Task, state: str, progress: int, status: str) -> None:
    """Progress metadata for the status endpoint; eager runs have no result backend"""
    if not task.request.is_eager:
        task.update_state(state=state, meta={"progress": progress, "status": status})


@celery_app.task(bind=True, base=CallbackTask, name="app.tasks.experiment_tasks.evaluate_grid_point")
def evaluate_grid_point(
    self,
    hyperparams: dict,
    matrix_path: str,
    signature_paths: Dict[str, str],
    n_seeds: int,
    base_seed: int,
    deltas: List[float],
) -> dict:
    """
    Train one grid point over all seeds

    Returns:
        {"records": [...]} on success, {"error": message} when a seed failed
    """
    try:
        dataset = ExperimentDataset.from_files(matrix_path, list(signature_paths.values()))
        hp = HyperParams.model_validate(hyperparams)
        # prefork workers are daemonic and cannot host a joblib process pool
        n_jobs = None if self.request.is_eager else 1
        records = evaluate_point(hp, dataset, n_seeds, base_seed, deltas, n_jobs=n_jobs)
        return {"records": [record.model_dump(mode="json") for record in records]}
    except (DpFlError, ValueError) as exc:
        logger.warning(f"Grid point {hyperparams} failed: {exc}")
        return {"error": str(exc)}


@celery_app.task(bind=True, base=CallbackTask, name="app.tasks.experiment_tasks.run_grid_search")
def run_grid_search(
    self,
    job_id: str,
    grid_file: str,
    matrix_path: str,
    signature_paths: List[str],
    n_seeds: int,
    base_seed: int,
    deltas: List[float],
) -> dict:
    """
    Whole grid search with progress tracking

    On a worker the points fan out to the grid_points queue as a group and
    are collected in grid order; eager runs use the in-process joblib map.

    Args:
        self: Task instance (bound)
        job_id: Unique job identifier
        grid_file: Grid config file
        matrix_path: Expression matrix file
        signature_paths: Signature files
        n_seeds: Repetitions per point
        base_seed: First seed
        deltas: Delta grid

    Returns:
        dict: Output path and run summary
    """
    try:
        _report_state(self, "STARTED", 0, "Loading dataset...")
        dataset = ExperimentDataset.from_files(matrix_path, signature_paths)
        grid = load_grid_config(grid_file)
        output_file = get_output_file_path(job_id)

        def report(done: int, total: int) -> None:
            _report_state(self, "PROGRESS", int(100 * done / total), f"Evaluated {done}/{total} grid points")

        failures = []
        try:
            records = grid_search(
                grid,
                dataset,
                n_seeds=n_seeds,
                base_seed=base_seed,
                out_path=output_file,
                deltas=deltas,
                distribute=not self.request.is_eager,
                on_progress=report,
            )
        except GridSearchError as exc:
            records = exc.records
            failures = [{"point": index, "error": error} for index, error in exc.failures]

        return {
            "job_id": job_id,
            "output_path": str(output_file),
            "n_points": len(grid),
            "n_records": len(records),
            "failures": failures,
            "status": "completed",
        }

    except SoftTimeLimitExceeded:
        logger.error(f"Task {self.request.id} exceeded time limit")
        raise
