"""
Cyclic Federated Training
Two clients alternately run E local DP-SGD steps on one shared parameter vector
for N rounds. Handing the model over is a value copy recorded in the transcript.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from app.core.exceptions import DimensionMismatchError, OverlappingClientsError, TrainingError
from app.services.accountant import AlphaGrid, DpPoint, SgmParams, best_dp_budget
from app.services.classifier import ModelParams, SampleSet, init_params, loss
from app.services.dp_sgd import DpSgdConfig, RngStream, dp_sgd_step
from app.services.models.base import ArchitectureSpec

logger = logging.getLogger(__name__)

CLIENT_IDS = (1, 2)


class FlConfig(BaseModel):
    """Protocol and optimizer settings of one cyclic run"""
    model_config = ConfigDict(frozen=True)

    n_rounds: int = Field(..., ge=1, description="Federated rounds N")
    local_steps: int = Field(..., ge=1, description="Local DP-SGD steps per round E")
    dp: DpSgdConfig
    arch: ArchitectureSpec
    master_seed: int = Field(0, description="Seed of every random draw in the run")

    @property
    def total_steps(self) -> int:
        """Steps each client's data goes through"""
        return self.n_rounds * self.local_steps


@dataclass(frozen=True)
class ClientState:
    """A client's local dataset and its random stream family"""
    client_id: int
    data: SampleSet
    rng: RngStream

    def step_stream(self, round_index: int, step_index: int) -> RngStream:
        return self.rng.child(round_index, step_index)


@dataclass(frozen=True)
class TranscriptEntry:
    round: int
    client: int
    steps_applied: int


@dataclass(frozen=True)
class FlRunResult:
    """Final model, the budget shared by both clients, and the protocol log"""
    final_params: ModelParams
    per_client_budget: DpPoint
    transcript: Tuple[TranscriptEntry, ...]


def dp_sgd_budget(dp: DpSgdConfig, total_steps: int, delta: float, grid: Optional[AlphaGrid] = None) -> DpPoint:
    """Best (epsilon, delta) after total_steps DP-SGD steps; a noise-free run has no finite budget"""
    if dp.sigma == 0.0:
        logger.debug("sigma=0: no finite budget, reporting epsilon=inf")
        return DpPoint(epsilon=math.inf, delta=delta)
    point, _ = best_dp_budget(SgmParams(q=dp.q, sigma=dp.sigma), total_steps, delta, grid)
    return point


def per_client_budget(cfg: FlConfig, delta: float, grid: Optional[AlphaGrid] = None) -> DpPoint:
    """
    (epsilon, delta) spent by each client.

    Only a client's own N*E steps touch its data; the other client's steps
    are post-processing.
    """
    return dp_sgd_budget(cfg.dp, cfg.total_steps, delta, grid)


def _check_clients(cfg: FlConfig, client1: SampleSet, client2: SampleSet) -> None:
    for client_id, data in zip(CLIENT_IDS, (client1, client2)):
        if data.n_samples == 0:
            raise TrainingError(f"Client {client_id} has no samples")
        if data.n_features != cfg.arch.input_dim:
            raise DimensionMismatchError(
                f"Client {client_id} has {data.n_features} features, architecture expects {cfg.arch.input_dim}"
            )
    if client1.sample_ids is not None and client2.sample_ids is not None:
        shared = set(client1.sample_ids) & set(client2.sample_ids)
        if shared:
            raise OverlappingClientsError(f"Client datasets share {len(shared)} sample(s)")


def run_cyclic_fl(
    cfg: FlConfig,
    client1: SampleSet,
    client2: SampleSet,
    delta: float,
    grid: Optional[AlphaGrid] = None,
) -> FlRunResult:
    """
    Run the two-client cyclic protocol.

    Client 1 initializes the model; every round client 1 applies E steps and
    hands the parameters to client 2, which applies E steps and hands them back.

    Args:
        cfg: Run configuration
        client1: Client 1 local data
        client2: Client 2 local data
        delta: Per-client failure probability
        grid: Renyi orders for the budget (settings default when omitted)

    Returns:
        FlRunResult, fully determined by cfg.master_seed
    """
    _check_clients(cfg, client1, client2)
    root = RngStream(seed=cfg.master_seed)
    clients = [
        ClientState(client_id=client_id, data=data, rng=root.child(client_id))
        for client_id, data in zip(CLIENT_IDS, (client1, client2))
    ]

    params = init_params(cfg.arch, cfg.master_seed)
    transcript = []
    for round_index in range(1, cfg.n_rounds + 1):
        for client in clients:
            for step_index in range(cfg.local_steps):
                params = dp_sgd_step(params, client.data, cfg.dp, client.step_stream(round_index, step_index))
            transcript.append(TranscriptEntry(round=round_index, client=client.client_id, steps_applied=cfg.local_steps))
        if logger.isEnabledFor(logging.DEBUG):
            losses = ", ".join(f"{loss(params, c.data):.4f}" for c in clients)
            logger.debug(f"Round {round_index}/{cfg.n_rounds} finished; client losses: {losses}")

    budget = per_client_budget(cfg, delta, grid)
    logger.debug(
        f"Cyclic run finished: N={cfg.n_rounds}, E={cfg.local_steps}, seed={cfg.master_seed}, "
        f"epsilon={budget.epsilon:.4g}, delta={budget.delta:g}"
    )
    return FlRunResult(final_params=params, per_client_budget=budget, transcript=tuple(transcript))
