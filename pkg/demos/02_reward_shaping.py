#!/usr/bin/env python3
"""Length-capped reward shaping: hard cutoff vs. randomized caps.

A hard token limit gives a correct solution full reward one token below the
limit and nothing one token above it. Drawing the cap from a distribution
instead turns that cliff into a smooth ramp in expectation: uniform caps give
a linear ramp, a gaussian gives a sigmoid decay, a truncated exponential an
exponential decay. Incorrect solutions score zero at every length.
"""

from verifine import ClipDistribution, hard_clip_reward, rc_reward, rc_reward_mc

DISTS = {
    "hard(90k)": ClipDistribution.hard(90_000),
    "uniform(60k,90k)": ClipDistribution.uniform(60_000, 90_000),
    "gaussian(75k,8k)": ClipDistribution.gaussian(75_000, 8_000),
    "truncexp(1/30k,90k)": ClipDistribution.truncexp(1 / 30_000, 90_000),
}

lengths = [40_000, 55_000, 60_000, 65_000, 75_000, 85_000, 89_999, 90_000, 95_000]

header = "length".rjust(8) + "".join(name.rjust(22) for name in DISTS)
print(header)
print("-" * len(header))
for length in lengths:
    row = f"{length:8d}"
    for dist in DISTS.values():
        row += f"{rc_reward(1, length, dist):22.4f}"
    print(row)

print("\nhard cap is the degenerate case of a point-mass cap distribution:")
for length in (89_000, 91_000):
    closed = rc_reward(1, length, DISTS["hard(90k)"])
    step = hard_clip_reward(1, length, 90_000)
    print(f"  length {length}: rc_reward {closed} == hard_clip_reward {step}")

print("\nMonte Carlo estimates converge to the closed forms:")
for name, dist in DISTS.items():
    closed = rc_reward(1, 75_000, dist)
    mc = rc_reward_mc(1, 75_000, dist, samples=200_000, seed=7)
    print(f"  {name:>20}: closed {closed:.4f}  mc {mc:.4f}  |diff| {abs(closed - mc):.4f}")

print("\nincorrect solutions stay at zero regardless of length:")
print("  rc_reward(0, 10_000, uniform) =", rc_reward(0, 10_000, DISTS["uniform(60k,90k)"]))
