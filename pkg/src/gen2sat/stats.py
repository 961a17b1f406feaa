"""Small statistics helpers shared by the Monte Carlo modules."""

from __future__ import annotations

import math

from scipy import stats

Z95 = float(stats.norm.ppf(0.975))


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    p = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # guard the endpoints against rounding so the interval always holds p
    if successes == 0:
        lo = 0.0
    if successes == trials:
        hi = 1.0
    return min(lo, p), max(hi, p)


def binomial_stderr(successes: int, trials: int) -> float:
    p = successes / trials
    return math.sqrt(p * (1 - p) / trials)
