"""
Pydantic Schemas for grid-search jobs
"""
from pydantic import BaseModel, Field
from typing import List, Optional
from datetime import datetime

from app.api.schemas.common import JobStatus
from app.core.config import settings


class GridRequest(BaseModel):
    """Grid search submission; bare file names resolve under the dataset directory"""
    grid_file: str = Field(..., description="Grid config file")
    dataset: str = Field(..., description="Expression matrix file")
    signatures: List[str] = Field(..., min_length=1, description="Signature files")
    seeds: int = Field(default_factory=lambda: settings.N_SEEDS, ge=1)
    base_seed: int = Field(default_factory=lambda: settings.BASE_SEED)
    deltas: Optional[List[float]] = Field(None, description="Delta grid (configured default when omitted)")

    class Config:
        json_schema_extra = {
            "example": {
                "grid_file": "grid.txt",
                "dataset": "train.csv",
                "signatures": ["rotterdam.txt", "citbcmst.txt"],
                "seeds": 10,
                "base_seed": 0
            }
        }


class GridResponse(BaseModel):
    """Response model for a grid submission"""
    job_id: str = Field(..., description="Unique job identifier")
    status: JobStatus = Field(..., description="Current job status")
    message: str = Field(..., description="Status message")
    created_at: datetime = Field(default_factory=datetime.now)
    download_url: Optional[str] = None


class StatusResponse(BaseModel):
    """Response model for status check"""
    job_id: str = Field(..., description="Unique job identifier")
    status: JobStatus = Field(..., description="Current job status")
    message: str = Field(..., description="Status message")
    progress: Optional[int] = None
    error: Optional[str] = None
    download_url: Optional[str] = None
