#!/usr/bin/env python3
"""Reproduce the qualitative scaling shapes in simulation.

Three comparisons, all under a regime where refinement fixes more than it
breaks and the verifier is imperfect:

  1. sequential rounds (N=1, growing M) vs. parallel threads (M=1, growing N)
     at comparable token budgets: feedback-driven refinement is the more
     token-efficient axis;
  2. threads stacked on top of saturated refinement (N=16, M=16) push past
     the sequential plateau;
  3. more verdicts per round improve ranking, but a gap to the execution
     oracle persists: verifier quality, not sample count, is the bottleneck.

Single-thread points are cross-checked against the exact Markov-chain value.
"""

import time
from dataclasses import replace

from verifine import (
    PipelineConfig,
    Problem,
    SimulatedJudge,
    SimulatorBackend,
    SimulatorParams,
    TestCase,
    run_pipeline,
    thread_success_probability,
)

RUNS = 300  # per point; raise for tighter error bars

problem = Problem(
    id="scaling-demo", statement="placeholder", tests=(TestCase(b"", b""),),
    time_limit_ms=100, memory_limit_mib=64,
)
params = SimulatorParams(
    p_first_correct=0.12,
    verifier_tpr=0.7,
    verifier_tnr=0.75,
    p_refine_fix=0.15,
    p_refine_break=0.02,
)
backend = SimulatorBackend(params)
judge = SimulatedJudge()


def point(threads, rounds, verdicts, seed_base):
    config = PipelineConfig(
        threads=threads, max_rounds=rounds, verdicts_per_round=verdicts,
        max_generation_tokens=100_000, concurrency_cap=1, rng_seed=0,
        backend_id="simulator", judge_attached=True,
    )
    wins = oracle = tokens = 0
    for s in range(RUNS):
        run = run_pipeline(problem, replace(config, rng_seed=seed_base * 10_000 + s), backend, judge)
        chosen = run.threads[run.selected.thread_index].rounds[run.selected.round_index - 1]
        wins += chosen.exec_result.binary_score
        oracle += int(any(r.exec_result.binary_score for t in run.threads for r in t.rounds))
        tokens += run.total_tokens
    return wins / RUNS, oracle / RUNS, tokens / RUNS


start = time.time()
print(f"{RUNS} seeded runs per point\n")

print("1) sequential vs parallel (V=8):")
for label, n, m, seed in (("N=1  M=4 ", 1, 4, 1), ("N=1  M=16", 1, 16, 2),
                          ("N=4  M=1 ", 4, 1, 3), ("N=16 M=1 ", 16, 1, 4)):
    acc, _, tokens = point(n, m, 8, seed)
    print(f"   {label}: accuracy {acc:.3f} at {tokens/1000:6.1f}K tokens")

print("\n2) threads on top of saturated refinement (V=8):")
seq_acc, _, _ = point(1, 16, 8, 2)
comb_acc, _, comb_tokens = point(16, 16, 8, 5)
print(f"   sequential plateau (N=1,  M=16): {seq_acc:.3f}")
print(f"   combined           (N=16, M=16): {comb_acc:.3f} at {comb_tokens/1000:.0f}K tokens")

print("\n3) verdict count vs the execution oracle (N=8, M=1):")
for v in (1, 2, 4, 8):
    acc, oracle, _ = point(8, 1, v, 10 + v)
    print(f"   V={v}: accuracy {acc:.3f}   oracle pass@8 {oracle:.3f}   gap {oracle-acc:+.3f}")

print("\nMarkov-chain cross-check for single threads (V=8):")
for rounds in (4, 16):
    exact = thread_success_probability(params, rounds, 8)
    empirical, _, _ = point(1, rounds, 8, 20 + rounds)
    print(f"   M={rounds:2d}: exact {exact:.3f}   simulated {empirical:.3f}")

print(f"\nelapsed {time.time()-start:.0f}s")
