"""Length-capped reward shaping.

The baseline reward multiplies the binary execution score by a hard length
cutoff: score * 1[length <= limit]. Randomizing the cap over a distribution D
turns the cutoff into a smooth ramp in expectation:

    reward(score, length) = score * P(length <= cap) = score * (1 - F_D(length))

where F_D is the cap distribution's CDF. Incorrect solutions get zero reward
regardless of length, so only the incentive on correct solutions changes.
"""

from __future__ import annotations

import math

import numpy as np

from .domain import ClipDistribution


def hard_clip_reward(score: int, length: int, limit: float) -> float:
    """score * 1[length <= limit]; the step-function baseline."""
    if limit <= 0:
        raise ValueError("limit must be > 0")
    if length < 0:
        raise ValueError("length must be >= 0")
    return float(score) if length <= limit else 0.0


def cap_cdf(dist: ClipDistribution, length: float) -> float:
    """P(cap <= length) for the given cap distribution.

    Monotone nondecreasing in length. The hard variant is the degenerate
    point mass, so its CDF is the step 1[length > limit], matching the
    weak inequality of hard_clip_reward. The gaussian variant uses the
    full normal CDF (no truncation at zero); truncexp renormalizes the
    exponential CDF on [0, upper].
    """
    if dist.variant == "hard":
        (limit,) = dist.params
        return 1.0 if length > limit else 0.0
    if dist.variant == "uniform":
        low, high = dist.params
        if length <= low:
            return 0.0
        if length >= high:
            return 1.0
        return (length - low) / (high - low)
    if dist.variant == "gaussian":
        mean, stddev = dist.params
        # Normal CDF via erfc for full double-precision accuracy in the tails.
        return 0.5 * math.erfc((mean - length) / (stddev * math.sqrt(2.0)))
    if dist.variant == "truncexp":
        rate, upper = dist.params
        if length <= 0:
            return 0.0
        if length >= upper:
            return 1.0
        return math.expm1(-rate * length) / math.expm1(-rate * upper)
    raise ValueError(f"unknown distribution variant: {dist.variant}")


def rc_reward(score: int, length: int, dist: ClipDistribution) -> float:
    """Closed-form randomized-clip reward: score * (1 - F_D(length))."""
    if length < 0:
        raise ValueError("length must be >= 0")
    if score == 0:
        return 0.0
    return float(score) * (1.0 - cap_cdf(dist, length))


def sample_caps(dist: ClipDistribution, samples: int, seed: int) -> np.ndarray:
    """Draw cap values from the distribution (gaussian caps may be negative)."""
    rng = np.random.default_rng(seed)
    if dist.variant == "hard":
        (limit,) = dist.params
        return np.full(samples, limit)
    if dist.variant == "uniform":
        low, high = dist.params
        return rng.uniform(low, high, size=samples)
    if dist.variant == "gaussian":
        mean, stddev = dist.params
        return rng.normal(mean, stddev, size=samples)
    if dist.variant == "truncexp":
        rate, upper = dist.params
        # Inverse-CDF sampling of the exponential renormalized on [0, upper].
        u = rng.uniform(0.0, 1.0, size=samples)
        return np.log1p(u * math.expm1(-rate * upper)) / -rate
    raise ValueError(f"unknown distribution variant: {dist.variant}")


def rc_reward_mc(score: int, length: int, dist: ClipDistribution, samples: int, seed: int) -> float:
    """Monte Carlo estimate of the randomized-clip reward.

    Averages the hard-clipped reward over ``samples`` cap draws; converges to
    rc_reward as samples grow. Exact (for any sample count) when score is 0
    or the distribution is the hard point mass.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if score == 0:
        return 0.0
    caps = sample_caps(dist, samples, seed)
    return float(score) * float(np.mean(length <= caps))
