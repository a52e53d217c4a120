"""
Statistics Utilities
Wilson score intervals for Monte-Carlo event frequencies
"""
import math
from typing import Tuple

from scipy import stats


def wilson_interval(successes: int, trials: int, confidence: float) -> Tuple[float, float]:
    """
    Two-sided Wilson score interval for a binomial proportion

    Args:
        successes: Number of trials in which the event occurred
        trials: Total number of trials
        confidence: Confidence level in (0, 1)

    Returns:
        Tuple of (lower, upper)
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")

    phat = successes / trials
    z = stats.norm.ppf(1 - (1 - confidence) / 2)

    a = phat + (z ** 2) / (2 * trials)
    b = math.sqrt(phat * (1 - phat) / trials + (z ** 2) / (4 * trials ** 2))
    c = 1 + (z ** 2) / trials

    lower = max(0.0, (a - z * b) / c)
    upper = min(1.0, (a + z * b) / c)
    return lower, upper
