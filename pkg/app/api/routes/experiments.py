"""
Experiment API Routes
Grid-search submission, status checking and frontier download (Celery-powered)
"""
import logging
from datetime import datetime

from celery.result import AsyncResult
from fastapi import APIRouter, HTTPException
from fastapi.responses import FileResponse

from app.api.schemas.common import ErrorResponse, JobStatus
from app.api.schemas.experiments import GridRequest, GridResponse, StatusResponse
from app.core.config import settings
from app.tasks.experiment_tasks import run_grid_search
from app.utils.file_handler import generate_job_id, get_output_file_path, resolve_dataset_path

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/experiments", tags=["experiments"])


@router.post(
    "/grid",
    response_model=GridResponse,
    responses={400: {"model": ErrorResponse}},
    summary="Submit a grid search",
    description="Evaluate every grid point over several seeds and write a frontier CSV. Returns a job ID."
)
def submit_grid_search(request: GridRequest):
    """
    Submit a grid search as one Celery task

    - **grid_file**: grid config
    - **dataset**: expression matrix
    - **signatures**: signature files named by the grid
    """
    paths = {
        "grid_file": resolve_dataset_path(request.grid_file),
        "dataset": resolve_dataset_path(request.dataset),
    }
    signature_paths = [resolve_dataset_path(name) for name in request.signatures]
    for label, path in list(paths.items()) + [("signature", p) for p in signature_paths]:
        if not path.exists():
            raise HTTPException(status_code=400, detail=f"{label} file '{path}' not found")

    job_id = generate_job_id()
    try:
        task = run_grid_search.apply_async(
            args=[
                job_id,
                str(paths["grid_file"]),
                str(paths["dataset"]),
                [str(p) for p in signature_paths],
                request.seeds,
                request.base_seed,
                request.deltas or settings.delta_grid_list,
            ],
            task_id=job_id,
        )
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")

    if settings.CELERY_TASK_ALWAYS_EAGER:
        if task.failed():
            raise HTTPException(status_code=400, detail=str(task.result))
        return GridResponse(
            job_id=job_id,
            status=JobStatus.COMPLETED,
            message="Grid search completed",
            download_url=f"/api/experiments/download/{job_id}",
        )

    return GridResponse(
        job_id=job_id,
        status=JobStatus.PENDING,
        message="Grid search submitted successfully. Task is queued for processing.",
        created_at=datetime.now(),
    )


@router.get(
    "/status/{job_id}",
    response_model=StatusResponse,
    summary="Check grid-search status",
)
def get_grid_status(job_id: str):
    """
    Get job status from Celery (or from the output file when tasks run eagerly)

    - **job_id**: ID returned by /grid
    """
    output_file = get_output_file_path(job_id)
    if settings.CELERY_TASK_ALWAYS_EAGER:
        if output_file.exists():
            return StatusResponse(
                job_id=job_id,
                status=JobStatus.COMPLETED,
                message="Grid search completed",
                progress=100,
                download_url=f"/api/experiments/download/{job_id}",
            )
        return StatusResponse(job_id=job_id, status=JobStatus.FAILED, message="Unknown job or no output written")

    try:
        task_result = AsyncResult(job_id)
        celery_state = task_result.state
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Error checking task status: {str(e)}")

    if celery_state == "PENDING":
        return StatusResponse(job_id=job_id, status=JobStatus.PENDING, message="Task is waiting in queue")
    if celery_state in ["STARTED", "PROGRESS"]:
        info = task_result.info or {}
        return StatusResponse(
            job_id=job_id,
            status=JobStatus.PROCESSING,
            message=info.get("status", "Processing..."),
            progress=info.get("progress", 0),
        )
    if celery_state == "SUCCESS":
        return StatusResponse(
            job_id=job_id,
            status=JobStatus.COMPLETED,
            message="Grid search completed",
            progress=100,
            download_url=f"/api/experiments/download/{job_id}",
        )
    if celery_state in ["FAILURE", "REVOKED", "REJECTED"]:
        return StatusResponse(
            job_id=job_id,
            status=JobStatus.FAILED,
            message="Grid search failed",
            error=str(task_result.info) or "Unknown error occurred",
        )
    return StatusResponse(job_id=job_id, status=JobStatus.PENDING, message=f"Unknown state: {celery_state}")


@router.get(
    "/download/{job_id}",
    response_class=FileResponse,
    responses={404: {"model": ErrorResponse}},
    summary="Download the frontier CSV",
)
def download_frontier(job_id: str):
    """
    Download a finished job's frontier

    - **job_id**: ID returned by /grid
    """
    output_file = get_output_file_path(job_id)
    if not output_file.exists():
        raise HTTPException(status_code=404, detail=f"Job '{job_id}' not found or not yet finished")
    return FileResponse(path=output_file, media_type="text/csv", filename=f"frontier_{job_id}.csv")
