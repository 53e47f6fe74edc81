"""Success-rate statistics and campaign duration estimation."""

from __future__ import annotations

import math
from statistics import NormalDist

from .errors import UndefinedRateError, ValidationError
from .model import SuccessStats


def success_rate(stats: SuccessStats) -> float:
    """Point estimate successes/attempts."""
    if stats.attempts == 0:
        raise UndefinedRateError("success rate is undefined for 0 attempts")
    return stats.successes / stats.attempts


def confidence_interval(stats: SuccessStats, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Chosen over the normal approximation because it stays valid at zero
    successes, which all-quiet scans produce routinely.
    """
    if stats.attempts == 0:
        raise UndefinedRateError("confidence interval is undefined for 0 attempts")
    if not 0 < level < 1:
        raise ValidationError(f"confidence level must be in (0, 1), got {level}")
    n = stats.attempts
    p = stats.successes / n
    z = NormalDist().inv_cdf(0.5 + level / 2)
    z2 = z * z
    denom = 1 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n))
    # The bound at an all-or-nothing sample is exactly 0 or 1; pin it so
    # float noise cannot push the interval off the point estimate.
    low = 0.0 if stats.successes == 0 else max(0.0, center - half)
    high = 1.0 if stats.successes == n else min(1.0, center + half)
    return low, high


def format_rate(stats: SuccessStats) -> str:
    """Percentage with two decimals, e.g. 2206/10000 -> '22.06%'."""
    return f"{100.0 * success_rate(stats):.2f}%"


def estimate_campaign_duration(
    positions: int, attempts_per_position: int, cycle_seconds: float
) -> float:
    """Total campaign duration in seconds for a uniform scan."""
    if positions <= 0 or attempts_per_position <= 0 or cycle_seconds <= 0:
        raise ValidationError("positions, attempts and cycle time must all be positive")
    return positions * attempts_per_position * cycle_seconds
