"""Small statistics helpers shared across modules."""

from __future__ import annotations

import math

# two-sided 95% normal quantile
Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return (0.0, 1.0)
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    # the bound is exactly sharp at the boundary counts; keep it there
    # instead of leaving float residue
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return (lo, hi)


def binomial_se(successes: int, n: int) -> float:
    """Standard error of a proportion; Wilson-width fallback for rare counts.

    The normal approximation collapses to 0 when successes is 0 or n; below
    25 observed successes the half-width of the Wilson interval (scaled back
    to one sigma) is a more honest spread estimate.
    """
    if n <= 0:
        return 1.0
    phat = successes / n
    if min(successes, n - successes) < 25:
        lo, hi = wilson_interval(successes, n)
        return (hi - lo) / (2.0 * Z95)
    return math.sqrt(phat * (1.0 - phat) / n)
