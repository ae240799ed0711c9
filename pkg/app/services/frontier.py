"""
Privacy Frontier
Hyperparameter and frontier record types, budget-target selection and
best-accuracy-per-budget rows for plotting.
"""
import logging
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field

from app.core.config import settings
from app.core.exceptions import BudgetViolationError, NoFeasibleConfigurationError
from app.services.dp_sgd import DpSgdConfig
from app.services.federated import FlConfig
from app.services.models.base import ArchitectureSpec, ModelKind

logger = logging.getLogger(__name__)

HYPERPARAM_COLUMNS = ["signature", "arch", "q", "eta", "sigma", "clip_c", "n_rounds", "local_steps"]
FRONTIER_COLUMNS = HYPERPARAM_COLUMNS + ["epsilon", "delta", "mean_accuracy", "std_accuracy", "n_seeds"]
PLOT_COLUMNS = ["delta", "epsilon", "signature", "best_accuracy"] + HYPERPARAM_COLUMNS[1:] + [
    "record_epsilon",
    "record_delta",
]


class HyperParams(BaseModel):
    """One grid point: signature, architecture and training hyperparameters"""
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    signature: str = Field(..., min_length=1, description="Gene signature name")
    arch: ModelKind = Field(..., description="Model family")
    q: float = Field(..., gt=0.0, le=1.0)
    eta: float = Field(..., gt=0.0)
    sigma: float = Field(..., ge=0.0)
    clip_c: float = Field(..., gt=0.0)
    n_rounds: int = Field(..., ge=1)
    local_steps: int = Field(..., ge=1)

    @property
    def total_steps(self) -> int:
        return self.n_rounds * self.local_steps

    def dp_config(self) -> DpSgdConfig:
        return DpSgdConfig(q=self.q, eta=self.eta, sigma=self.sigma, clip_c=self.clip_c)

    def fl_config(self, input_dim: int, master_seed: int) -> FlConfig:
        """Run configuration once the feature count is known"""
        return FlConfig(
            n_rounds=self.n_rounds,
            local_steps=self.local_steps,
            dp=self.dp_config(),
            arch=ArchitectureSpec(kind=self.arch, input_dim=input_dim),
            master_seed=master_seed,
        )


class FrontierRecord(HyperParams):
    """Grid point with its realized budget and accuracy over seeds"""
    model_config = ConfigDict(frozen=True, allow_inf_nan=True)

    epsilon: float = Field(..., ge=0.0)
    delta: float = Field(..., gt=0.0, lt=1.0)
    mean_accuracy: float = Field(..., ge=0.0, le=1.0)
    std_accuracy: float = Field(..., ge=0.0)
    n_seeds: int = Field(..., ge=1)

    @property
    def hyperparams(self) -> HyperParams:
        return HyperParams(**self.model_dump(include=set(HYPERPARAM_COLUMNS)))


class BudgetTarget(BaseModel):
    """Target (epsilon_t, delta_t)"""
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    epsilon_t: float = Field(..., gt=0.0)
    delta_t: float = Field(..., gt=0.0, lt=1.0)

    def admits(self, epsilon: float, delta: float) -> bool:
        """Coordinatewise feasibility"""
        return delta <= self.delta_t and epsilon <= self.epsilon_t


class PlotRow(BaseModel):
    """Best feasible accuracy at one (delta, epsilon, signature); empty when nothing is feasible"""
    model_config = ConfigDict(frozen=True)

    delta: float
    epsilon: float
    signature: str
    best_accuracy: Optional[float] = None
    arch: Optional[ModelKind] = None
    q: Optional[float] = None
    eta: Optional[float] = None
    sigma: Optional[float] = None
    clip_c: Optional[float] = None
    n_rounds: Optional[int] = None
    local_steps: Optional[int] = None
    record_epsilon: Optional[float] = None
    record_delta: Optional[float] = None


def sort_records(records: Sequence[FrontierRecord]) -> List[FrontierRecord]:
    """Stable sort by (delta, epsilon)"""
    return sorted(records, key=lambda record: (record.delta, record.epsilon))


def select_params(records: Sequence[FrontierRecord], target: BudgetTarget) -> FrontierRecord:
    """
    Pick the record for a budget target.

    Records must satisfy the target coordinatewise; among those the
    lexicographic maximum of (delta, epsilon) wins, then the higher mean
    accuracy, then the earliest record.

    Raises:
        NoFeasibleConfigurationError: nothing satisfies the target
    """
    best: Optional[FrontierRecord] = None
    for record in records:
        if not target.admits(record.epsilon, record.delta):
            continue
        key = (record.delta, record.epsilon, record.mean_accuracy)
        if best is None or key > (best.delta, best.epsilon, best.mean_accuracy):
            best = record
    if best is None:
        raise NoFeasibleConfigurationError(
            f"No record satisfies epsilon <= {target.epsilon_t}, delta <= {target.delta_t}"
        )
    if not target.admits(best.epsilon, best.delta):
        raise BudgetViolationError(f"Selected record ({best.epsilon}, {best.delta}) exceeds the target")
    logger.info(
        f"Selected {best.signature}/{best.arch.value} q={best.q} sigma={best.sigma} "
        f"at (epsilon={best.epsilon:.4g}, delta={best.delta:g}), accuracy {best.mean_accuracy:.4f}"
    )
    return best


def plot_rows(
    records: Sequence[FrontierRecord],
    deltas: Optional[Sequence[float]] = None,
    epsilon_grid: Optional[Sequence[float]] = None,
) -> List[PlotRow]:
    """
    Best feasible mean accuracy for every (delta, epsilon, signature).

    Feasible sets grow with epsilon, so best_accuracy is non-decreasing
    along epsilon for a fixed delta and signature.
    """
    deltas = settings.delta_grid_list if deltas is None else list(deltas)
    epsilon_grid = sorted(settings.plot_epsilon_grid_list if epsilon_grid is None else epsilon_grid)
    signatures: Dict[str, None] = dict.fromkeys(record.signature for record in records)

    rows = []
    for delta in deltas:
        for signature in signatures:
            candidates = [r for r in records if r.signature == signature]
            for epsilon in epsilon_grid:
                target = BudgetTarget(epsilon_t=epsilon, delta_t=delta)
                best: Optional[FrontierRecord] = None
                for record in candidates:
                    if target.admits(record.epsilon, record.delta) and (
                        best is None or record.mean_accuracy > best.mean_accuracy
                    ):
                        best = record
                if best is None:
                    rows.append(PlotRow(delta=delta, epsilon=epsilon, signature=signature))
                    continue
                rows.append(PlotRow(
                    delta=delta,
                    epsilon=epsilon,
                    signature=signature,
                    best_accuracy=best.mean_accuracy,
                    **best.model_dump(include=set(HYPERPARAM_COLUMNS[1:])),
                    record_epsilon=best.epsilon,
                    record_delta=best.delta,
                ))
    return rows
