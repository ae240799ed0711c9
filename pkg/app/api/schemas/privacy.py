"""
Pydantic Schemas for the accountant and frontier selection endpoints
"""
from pydantic import BaseModel, Field
from typing import List, Optional


class AccountantRequest(BaseModel):
    """Budget of a DP-SGD run"""
    q: float = Field(..., ge=0.0, le=1.0, description="Poisson sampling rate")
    sigma: float = Field(..., gt=0.0, description="Noise multiplier")
    steps: int = Field(..., ge=1, description="Number of composed steps")
    delta: float = Field(..., gt=0.0, lt=1.0, description="Failure probability")
    alpha_grid: Optional[List[float]] = Field(None, description="Renyi orders (default grid when omitted)")

    class Config:
        json_schema_extra = {
            "example": {"q": 0.05, "sigma": 1.2, "steps": 200, "delta": 1e-5}
        }


class BudgetRowSchema(BaseModel):
    alpha: float
    rdp_epsilon: float
    dp_epsilon: float


class AccountantResponse(BaseModel):
    """Best budget over the grid plus the per-order table"""
    epsilon: float = Field(..., description="Best (epsilon, delta)-DP epsilon")
    delta: float
    alpha: float = Field(..., description="Order attaining the best epsilon")
    table: List[BudgetRowSchema] = Field(default_factory=list)


class SelectRequest(BaseModel):
    """Budget target and the frontier to select from"""
    epsilon_t: float = Field(..., gt=0.0)
    delta_t: float = Field(..., gt=0.0, lt=1.0)
    frontier: Optional[str] = Field(None, description="Frontier CSV (configured default when omitted)")

    class Config:
        json_schema_extra = {
            "example": {"epsilon_t": 1.0, "delta_t": 1e-5}
        }
