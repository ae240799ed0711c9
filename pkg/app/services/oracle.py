"""
Quadrature Oracle for the SGM moments
Verification path only: integrates A_alpha = E_{z~mu0}[(mu/mu0)^alpha] and
B_alpha = E_{z~mu}[(mu0/mu)^alpha] numerically so tests can check the
closed forms used by the accountant.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import integrate, stats

from app.core.exceptions import AccountantError, InvalidOrderError
from app.services.accountant import SgmParams

# Integration runs over [min(0, 1 - alpha), max(1, alpha)] widened by this many sigmas
ORACLE_TAIL_SIGMAS = 14.0
# Odd so that every-other-point subgrid is also a valid Simpson grid
ORACLE_POINTS = 200_001


@dataclass(frozen=True)
class OracleEstimate:
    """Quadrature values in log space with their estimated absolute log errors"""
    log_a: float
    log_b: float
    log_a_error: float
    log_b_error: float

    @property
    def a_alpha(self) -> float:
        return math.exp(self.log_a)

    @property
    def b_alpha(self) -> float:
        return math.exp(self.log_b)


def _log_integral(z: np.ndarray, log_f: np.ndarray) -> Tuple[float, float]:
    shift = float(np.max(log_f))
    f = np.exp(log_f - shift)
    fine = integrate.simpson(f, x=z)
    coarse = integrate.simpson(f[::2], x=z[::2])
    return shift + math.log(fine), abs(math.log(fine) - math.log(coarse))


def oracle_a_alpha(params: SgmParams, alpha: float) -> OracleEstimate:
    """
    Numerically integrate both SGM moments.

    Args:
        params: Sampling rate (0 < q < 1) and noise multiplier
        alpha: Renyi order > 1

    Returns:
        OracleEstimate with ln A_alpha, ln B_alpha and error estimates
        (difference against the half-resolution grid)
    """
    q, sigma = params.q, params.sigma
    if not 0.0 < q < 1.0:
        raise AccountantError(f"Oracle requires 0 < q < 1, got {q}")
    if not alpha > 1.0:
        raise InvalidOrderError(f"Renyi order must be > 1, got {alpha}")

    lower = min(0.0, 1.0 - alpha) - ORACLE_TAIL_SIGMAS * sigma
    upper = max(1.0, alpha) + ORACLE_TAIL_SIGMAS * sigma
    z = np.linspace(lower, upper, ORACLE_POINTS)

    log_mu0 = stats.norm.logpdf(z, loc=0.0, scale=sigma)
    log_mu1 = stats.norm.logpdf(z, loc=1.0, scale=sigma)
    log_mu = np.logaddexp(math.log1p(-q) + log_mu0, math.log(q) + log_mu1)

    log_a, error_a = _log_integral(z, alpha * log_mu + (1.0 - alpha) * log_mu0)
    log_b, error_b = _log_integral(z, alpha * log_mu0 + (1.0 - alpha) * log_mu)
    return OracleEstimate(log_a=log_a, log_b=log_b, log_a_error=error_a, log_b_error=error_b)
