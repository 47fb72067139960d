#!/usr/bin/env python3
"""Per-turn rewards and the two advantage estimators, side by side.

Trajectories alternate solution and verification turns. Solution turns are
rewarded by execution; verification turns for agreeing with execution. The
batch is then normalized two ways:

  - turn-grouped: mean-center each turn index separately (no std division);
  - batch whitening: one (mean, std) over every reward regardless of role.

Whitening hands a rare generation success and a routine verification success
the same advantage, which is exactly the distortion turn grouping avoids.
"""

from dataclasses import replace

from verifine import (
    PipelineConfig,
    Problem,
    SimulatedJudge,
    SimulatorBackend,
    SimulatorParams,
    TestCase,
    discounted_returns,
    grpo_advantages,
    per_turn_rewards,
    ppo_clip_term,
    run_pipeline,
    whitened_advantages,
)

problem = Problem(
    id="adv-demo", statement="placeholder", tests=(TestCase(b"", b""),),
    time_limit_ms=100, memory_limit_mib=64,
)
# Weak generator, decent verifier: generation rewards are rare-positive while
# verification rewards are common-positive, the role mix that distorts
# whitened advantages.
params = SimulatorParams(0.15, 0.85, 0.8, 0.3, 0.05)
backend = SimulatorBackend(params)
judge = SimulatedJudge()
config = PipelineConfig(
    threads=1, max_rounds=3, verdicts_per_round=1, max_generation_tokens=100_000,
    concurrency_cap=1, rng_seed=0, backend_id="simulator", judge_attached=True,
)

tables = []
for seed in range(16):
    run = run_pipeline(problem, replace(config, rng_seed=seed), backend, judge)
    tables.append(per_turn_rewards(run.threads[0]))

print("per-turn rewards (one row per trajectory, solution/verification pairs):")
for i, table in enumerate(tables[:8]):
    cells = "  ".join(f"{t.role.value[:3]}={t.reward:.0f}" for t in table.turns)
    print(f"  traj {i}: {cells}")

grouped = grpo_advantages(tables)
whitened = whitened_advantages(tables)

print("\nturn means (turn-grouped estimator):")
for turn_index in sorted(grouped.turn_means):
    print(f"  turn {turn_index}: mean reward {grouped.turn_means[turn_index]:.3f}")
print(f"\nwhitening pools everything: mean {whitened.mean:.3f}, std {whitened.std:.3f}")

print("\nadvantages for trajectory 0:")
print("  rewards:     ", [t.reward for t in tables[0].turns])
print("  turn-grouped:", [round(a, 3) for a in grouped.advantages[0]])
print("  whitened:    ", [round(a, 3) for a in whitened.advantages[0]])

print("\ndiscounted returns over a (0, 1, 1) reward sequence:")
for gamma in (0.0, 0.5, 1.0):
    print(f"  gamma={gamma}: {discounted_returns([0.0, 1.0, 1.0], gamma)}")

print("\nclipped surrogate term at epsilon=0.2:")
for ratio, advantage in ((1.0, 0.7), (1.5, 1.0), (0.5, -1.0), (2.0, -0.3)):
    print(f"  ratio {ratio:>4}, advantage {advantage:+.1f} -> {ppo_clip_term(ratio, advantage, 0.2):+.3f}")
