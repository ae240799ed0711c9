"""
Renyi DP Accountant
RDP cost of Sampled Gaussian Mechanism steps, additive composition and
conversion to the best (epsilon, delta)-DP budget over a grid of orders.

All functions are pure: no shared mutable state beyond a read-only cache.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import special

from app.core.config import settings
from app.core.exceptions import (
    AccountantError,
    InvalidOrderError,
    NegativeLogMomentError,
    NoValidOrderError,
    SeriesNotConvergedError,
    UndefinedCrossoverError,
)

logger = logging.getLogger(__name__)

# Dense where the RDP -> DP conversion usually optimizes
DEFAULT_ALPHA_ORDERS: Tuple[float, ...] = (
    (1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 3.0, 3.5, 4.0, 4.5)
    + tuple(float(order) for order in range(5, 65))
    + (128.0, 256.0)
)

# Terms of the fractional series evaluated per vectorized batch
_SERIES_CHUNK = 256


class SgmParams(BaseModel):
    """One subsampled-Gaussian step"""
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    q: float = Field(..., ge=0.0, le=1.0, description="Poisson sampling rate")
    sigma: float = Field(..., gt=0.0, description="Noise multiplier relative to sensitivity")


class RdpPoint(BaseModel):
    """(alpha, epsilon)-RDP budget.

    ``unit_epsilon`` and ``steps`` record how the point was composed so that
    repeated composition multiplies integers only and stays exact.
    """
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=1.0, description="Renyi order")
    epsilon: float = Field(..., ge=0.0, description="RDP budget (nats)")
    unit_epsilon: float = Field(..., ge=0.0, description="Per-step budget this point composes")
    steps: int = Field(1, ge=1, description="Number of composed steps")

    @model_validator(mode="before")
    @classmethod
    def _default_unit_epsilon(cls, data):
        if isinstance(data, dict) and data.get("unit_epsilon") is None and "epsilon" in data:
            data = {**data, "unit_epsilon": data["epsilon"]}
        return data


class DpPoint(BaseModel):
    """(epsilon, delta)-DP budget; epsilon is +inf for non-private runs"""
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(..., ge=0.0, description="DP budget (nats)")
    delta: float = Field(..., gt=0.0, lt=1.0, description="Failure probability")


class AlphaGrid(BaseModel):
    """Strictly increasing Renyi orders, all > 1"""
    model_config = ConfigDict(frozen=True)

    orders: Tuple[float, ...]

    @field_validator("orders")
    @classmethod
    def _check_orders(cls, orders: Tuple[float, ...]) -> Tuple[float, ...]:
        if not orders:
            raise ValueError("alpha grid must not be empty")
        if any(not order > 1.0 for order in orders):
            raise ValueError("every Renyi order must be > 1")
        if any(b <= a for a, b in zip(orders, orders[1:])):
            raise ValueError("Renyi orders must be strictly increasing")
        return orders

    @classmethod
    def default(cls) -> "AlphaGrid":
        """Grid from settings, falling back to DEFAULT_ALPHA_ORDERS"""
        configured = settings.alpha_grid_list
        return cls(orders=tuple(configured) if configured else DEFAULT_ALPHA_ORDERS)

    @classmethod
    def parse(cls, text: str) -> "AlphaGrid":
        """Parse a comma-separated list such as ``"1.5,2,4,8"``"""
        try:
            orders = tuple(float(item) for item in text.split(",") if item.strip())
        except ValueError as exc:
            raise AccountantError(f"Invalid alpha grid '{text}': {exc}") from exc
        return cls(orders=orders)


@dataclass(frozen=True)
class SgmAnalysisContext:
    """Mixture mu = (1-q) N(0, s^2) + q N(1, s^2) and the crossover z1 of log(mu/mu0)"""
    z1: float
    mixture_weight: float
    mu0_mean: float = 0.0
    mu1_mean: float = 1.0

    @classmethod
    def from_params(cls, params: SgmParams) -> "SgmAnalysisContext":
        q = params.q
        if not 0.0 < q < 1.0:
            raise UndefinedCrossoverError(f"Crossover point undefined for q={q}; use the limit formulas")
        z1 = 0.5 + params.sigma ** 2 * math.log(1.0 / q - 1.0)
        return cls(z1=z1, mixture_weight=q)


@dataclass(frozen=True)
class BudgetRow:
    """One order of the per-alpha budget table"""
    alpha: float
    rdp_epsilon: float
    dp_epsilon: float


def _clamp_log_a(log_a: float) -> float:
    if log_a < 0.0:
        if log_a < -settings.NEGATIVE_LOG_SLACK:
            raise NegativeLogMomentError(f"log A_alpha = {log_a} is below the rounding slack")
        return 0.0
    return log_a


def _log_a_limit(params: SgmParams, alpha: float) -> Optional[float]:
    """Exact log A_alpha when the mixture degenerates (q = 0 or q = 1)"""
    if params.q == 0.0:
        return 0.0
    if params.q == 1.0:
        return (alpha * alpha - alpha) / (2.0 * params.sigma ** 2)
    return None


def _as_integer_order(alpha) -> int:
    if isinstance(alpha, bool):
        raise InvalidOrderError(f"Invalid Renyi order: {alpha!r}")
    if isinstance(alpha, (int, np.integer)):
        order = int(alpha)
    elif isinstance(alpha, (float, np.floating)) and float(alpha).is_integer():
        order = int(alpha)
    else:
        raise InvalidOrderError(f"Integer path requires an integer order, got {alpha!r}")
    if order < 2:
        raise InvalidOrderError(f"Integer path requires alpha >= 2, got {order}")
    return order


def _log_abs_binomial(alpha: float, k: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """log|C(alpha, k)| and sign(C(alpha, k)) for the generalized binomial coefficient"""
    rest = alpha - k + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_abs = special.gammaln(alpha + 1.0) - special.gammaln(k + 1.0) - special.gammaln(rest)
        sign = special.gammasgn(rest)
    # Gamma poles: the coefficient is exactly zero (integer alpha, k > alpha)
    vanishing = (rest <= 0.0) & (rest == np.floor(rest))
    log_abs = np.where(vanishing, -np.inf, log_abs)
    sign = np.where(vanishing, 0.0, sign)
    return log_abs, sign


def log_a_alpha_integer(params: SgmParams, alpha: int) -> float:
    """
    ln A_alpha for an integer order: binomial sum over k = 0..alpha in log space.

    Args:
        params: Sampling rate and noise multiplier
        alpha: Integer Renyi order >= 2

    Returns:
        ln A_alpha (nats), >= 0
    """
    order = _as_integer_order(alpha)
    if not params.sigma > 0.0:
        raise AccountantError(f"sigma must be > 0, got {params.sigma}")

    limit = _log_a_limit(params, float(order))
    if limit is not None:
        return limit

    q, sigma = params.q, params.sigma
    k = np.arange(order + 1, dtype=float)
    log_terms = (
        special.gammaln(order + 1.0) - special.gammaln(k + 1.0) - special.gammaln(order - k + 1.0)
        + k * math.log(q)
        + (order - k) * math.log1p(-q)
        + (k * k - k) / (2.0 * sigma ** 2)
    )
    return _clamp_log_a(float(special.logsumexp(log_terms)))


def log_a_alpha_fractional(
    params: SgmParams,
    alpha: float,
    tol: Optional[float] = None,
    max_terms: Optional[int] = None,
) -> float:
    """
    ln A_alpha for a real order > 1 from the erfc series split at z1.

    The integral over z < z1 expands (mu/mu0)^alpha in powers of q e^{(2z-1)/2s^2},
    the integral over z > z1 in the complementary powers; the Gaussian tail factors
    are log-normal-CDF values. Terms carry the sign of the generalized binomial
    coefficient and are combined with a signed log-sum-exp.

    Args:
        params: Sampling rate (0 < q < 1) and noise multiplier
        alpha: Renyi order > 1 (integer values accepted for cross-checking)
        tol: Stop once two consecutive terms beyond k > alpha are below tol
             relative to the partial sum
        max_terms: Hard cap on the number of terms

    Returns:
        ln A_alpha (nats), >= 0
    """
    if not alpha > 1.0:
        raise InvalidOrderError(f"Renyi order must be > 1, got {alpha}")
    context = SgmAnalysisContext.from_params(params)
    tol = settings.SERIES_TOLERANCE if tol is None else tol
    max_terms = settings.SERIES_MAX_TERMS if max_terms is None else max_terms

    q, sigma = params.q, params.sigma
    log_q, log_1mq = math.log(q), math.log1p(-q)
    two_var = 2.0 * sigma ** 2

    log_terms = np.empty(0)
    signs = np.empty(0)
    start = 0
    while start < max_terms:
        k = np.arange(start, min(start + _SERIES_CHUNK, max_terms), dtype=float)
        log_coef, sign = _log_abs_binomial(alpha, k)
        m = alpha - k
        with np.errstate(invalid="ignore"):
            log_below = (
                log_coef + k * log_q + m * log_1mq + (k * k - k) / two_var
                + special.log_ndtr((context.z1 - k) / sigma)
            )
            log_above = (
                log_coef + m * log_q + k * log_1mq + (m * m - m) / two_var
                + special.log_ndtr((m - context.z1) / sigma)
            )
            chunk = np.logaddexp(log_below, log_above)
        chunk = np.where(sign == 0.0, -np.inf, chunk)

        log_terms = np.concatenate([log_terms, chunk])
        signs = np.concatenate([signs, sign])
        start += len(k)

        shift = np.max(log_terms)
        magnitude = np.exp(log_terms - shift)
        partial = np.abs(np.cumsum(signs * magnitude))
        with np.errstate(divide="ignore", invalid="ignore"):
            small = magnitude / partial < tol
        index = np.arange(len(log_terms))
        done = np.flatnonzero(small[1:] & small[:-1] & (index[1:] > alpha)) + 1
        if done.size:
            stop = int(done[0]) + 1
            log_a, total_sign = special.logsumexp(log_terms[:stop], b=signs[:stop], return_sign=True)
            if total_sign <= 0:
                raise NegativeLogMomentError(f"Series for alpha={alpha} summed to a non-positive value")
            logger.debug(f"Fractional series alpha={alpha} q={q} sigma={sigma} converged in {stop} terms")
            return _clamp_log_a(float(log_a))

    raise SeriesNotConvergedError(alpha, max_terms)


@lru_cache(maxsize=8192)
def _cached_log_a(q: float, sigma: float, alpha: float) -> float:
    params = SgmParams(q=q, sigma=sigma)
    limit = _log_a_limit(params, alpha)
    if limit is not None:
        return limit
    if float(alpha).is_integer():
        return log_a_alpha_integer(params, int(alpha))
    return log_a_alpha_fractional(params, alpha)


def sgm_rdp_step(params: SgmParams, alpha: float) -> RdpPoint:
    """
    RDP cost of one subsampled-Gaussian step: (alpha, ln A_alpha / (alpha - 1)).

    q = 0 and q = 1 use the exact identity / Gaussian-mechanism limits for any order;
    otherwise integer orders take the binomial path and the rest the series path.
    """
    alpha = float(alpha)
    if not alpha > 1.0:
        raise InvalidOrderError(f"Renyi order must be > 1, got {alpha}")
    log_a = _cached_log_a(params.q, params.sigma, alpha)
    return RdpPoint(alpha=alpha, epsilon=max(log_a, 0.0) / (alpha - 1.0))


def compose_steps(step: RdpPoint, steps: int) -> RdpPoint:
    """Additive composition of `steps` identical mechanisms at a fixed order"""
    if isinstance(steps, bool) or not isinstance(steps, (int, np.integer)) or steps < 1:
        raise AccountantError(f"steps must be a positive integer, got {steps!r}")
    total = step.steps * int(steps)
    return RdpPoint(
        alpha=step.alpha,
        epsilon=step.unit_epsilon * total,
        unit_epsilon=step.unit_epsilon,
        steps=total,
    )


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise AccountantError(f"delta must lie in (0, 1), got {delta}")


def rdp_to_dp(point: RdpPoint, delta: float) -> DpPoint:
    """(alpha, eps)-RDP implies (eps + ln(1/delta)/(alpha - 1), delta)-DP"""
    _check_delta(delta)
    return DpPoint(epsilon=point.epsilon + math.log(1.0 / delta) / (point.alpha - 1.0), delta=delta)


def budget_table(
    params: SgmParams,
    total_steps: int,
    delta: float,
    grid: Optional[AlphaGrid] = None,
) -> List[BudgetRow]:
    """
    Per-order budgets after `total_steps` steps.

    Orders whose series fails are logged and left out of the table.
    """
    _check_delta(delta)
    if isinstance(total_steps, bool) or int(total_steps) != total_steps or total_steps < 1:
        raise AccountantError(f"total_steps must be a positive integer, got {total_steps!r}")
    grid = grid or AlphaGrid.default()

    rows = []
    for alpha in grid.orders:
        try:
            composed = compose_steps(sgm_rdp_step(params, alpha), int(total_steps))
        except (SeriesNotConvergedError, NegativeLogMomentError) as exc:
            logger.warning(f"Skipping alpha={alpha}: {exc}")
            continue
        converted = rdp_to_dp(composed, delta)
        rows.append(BudgetRow(alpha=alpha, rdp_epsilon=composed.epsilon, dp_epsilon=converted.epsilon))
    return rows


def best_dp_budget(
    params: SgmParams,
    total_steps: int,
    delta: float,
    grid: Optional[AlphaGrid] = None,
) -> Tuple[DpPoint, float]:
    """
    Smallest (epsilon, delta)-DP budget over the order grid.

    Returns:
        Tuple of (DpPoint, chosen alpha); ties go to the smallest alpha
    """
    rows = budget_table(params, total_steps, delta, grid)
    if not rows:
        raise NoValidOrderError(f"No Renyi order produced a budget for q={params.q}, sigma={params.sigma}")

    best = rows[0]
    for row in rows[1:]:
        if row.dp_epsilon < best.dp_epsilon:
            best = row
    logger.debug(
        f"Best budget q={params.q} sigma={params.sigma} steps={total_steps}: "
        f"eps={best.dp_epsilon:.6g} at alpha={best.alpha}"
    )
    return DpPoint(epsilon=best.dp_epsilon, delta=delta), best.alpha

