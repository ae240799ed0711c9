"""
Privacy API Routes
Accountant queries and budget-target selection over a stored frontier
"""
import logging
from pathlib import Path

from fastapi import APIRouter, HTTPException
from pydantic import ValidationError

from app.api.schemas.common import ErrorResponse
from app.api.schemas.privacy import AccountantRequest, AccountantResponse, BudgetRowSchema, SelectRequest
from app.core.config import settings
from app.core.exceptions import DpFlError
from app.services.accountant import AlphaGrid, SgmParams, budget_table, best_dp_budget
from app.services.frontier import BudgetTarget, FrontierRecord, select_params
from app.utils.file_handler import resolve_dataset_path
from app.utils.frontier_store import read_frontier

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api", tags=["privacy"])


@router.post(
    "/accountant",
    response_model=AccountantResponse,
    responses={400: {"model": ErrorResponse}},
    summary="Privacy budget of a DP-SGD run",
    description="Best (epsilon, delta) over the Renyi order grid for `steps` subsampled Gaussian steps."
)
def accountant(request: AccountantRequest):
    """
    Compute the per-order budget table and its minimum

    - **q**: sampling rate
    - **sigma**: noise multiplier
    - **steps**: number of steps
    - **delta**: failure probability
    """
    try:
        grid = AlphaGrid(orders=tuple(request.alpha_grid)) if request.alpha_grid else None
        params = SgmParams(q=request.q, sigma=request.sigma)
        table = budget_table(params, request.steps, request.delta, grid)
        point, alpha = best_dp_budget(params, request.steps, request.delta, grid)
    except (DpFlError, ValidationError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")

    return AccountantResponse(
        epsilon=point.epsilon,
        delta=point.delta,
        alpha=alpha,
        table=[BudgetRowSchema(alpha=r.alpha, rdp_epsilon=r.rdp_epsilon, dp_epsilon=r.dp_epsilon) for r in table],
    )


@router.post(
    "/frontier/select",
    response_model=FrontierRecord,
    responses={400: {"model": ErrorResponse}, 404: {"model": ErrorResponse}},
    summary="Select hyperparameters for a budget",
    description="Feasible frontier record with the lexicographically largest (delta, epsilon)."
)
def select_frontier_record(request: SelectRequest):
    """
    Select from a frontier CSV

    - **epsilon_t**, **delta_t**: target budget
    - **frontier**: frontier file (default: configured output frontier)
    """
    path = settings.frontier_path if request.frontier is None else resolve_dataset_path(request.frontier)
    if not Path(path).exists():
        raise HTTPException(status_code=404, detail=f"Frontier file '{path}' not found")
    try:
        return select_params(
            read_frontier(path),
            BudgetTarget(epsilon_t=request.epsilon_t, delta_t=request.delta_t),
        )
    except DpFlError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")
