#!/usr/bin/env python3
"""Walk through one full pipeline run on the seeded simulator.

Spawns 4 solution threads, each running up to 3 solve->verify->refine rounds
with 2 verdicts per round, then shows how the final answer is selected by
verdict score (earlier rounds win ties). Re-running with the same seed
reproduces the run byte for byte.
"""

from verifine import (
    PipelineConfig,
    Problem,
    ReplayBackend,
    SimulatedJudge,
    SimulatorBackend,
    SimulatorParams,
    TestCase,
    latent_correctness,
    run_pipeline,
    serialize_run,
    token_totals,
)

problem = Problem(
    id="demo-problem",
    statement="Read two integers and print their sum.",
    tests=(TestCase(b"1 2\n", b"3\n"), TestCase(b"5 7\n", b"12\n")),
    time_limit_ms=1000,
    memory_limit_mib=256,
)

# A mediocre model: 30% first-shot accuracy, a verifier that catches most
# mistakes, and refinement that fixes more than it breaks.
params = SimulatorParams(
    p_first_correct=0.3,
    verifier_tpr=0.9,
    verifier_tnr=0.7,
    p_refine_fix=0.35,
    p_refine_break=0.05,
)
config = PipelineConfig(
    threads=4,
    max_rounds=3,
    verdicts_per_round=2,
    max_generation_tokens=100_000,
    concurrency_cap=4,
    rng_seed=2024,
    backend_id="simulator",
    judge_attached=True,
)

backend = SimulatorBackend(params)
run = run_pipeline(problem, config, backend, judge=SimulatedJudge())

print(f"run for {run.problem_id!r}, seed {run.rng_seed}, {run.total_tokens} tokens\n")
for thread in run.threads:
    print(f"thread {thread.thread_index} ({thread.termination.value}):")
    for i, rnd in enumerate(thread.rounds, start=1):
        marks = "".join("+" if v.judgment else "-" for v in rnd.verdicts)
        truth = "correct" if latent_correctness(rnd.candidate) else "incorrect"
        print(
            f"  round {i}: verdicts [{marks}] score {rnd.score}/{config.verdicts_per_round}"
            f"  (ground truth: {truth}, exec {rnd.exec_result.status.value})"
        )
print(f"\nselected: thread {run.selected.thread_index}, round {run.selected.round_index}")

totals = token_totals(run)
print(f"tokens by role: {totals['per_role']}")

# Determinism: identical seed, identical bytes.
again = run_pipeline(problem, config, backend, judge=SimulatedJudge())
print("re-execution is byte-identical:", serialize_run(again) == serialize_run(run))

# Replay: the logged run drives a backend that serves recorded calls.
replayed = run_pipeline(problem, config, ReplayBackend(run), judge=SimulatedJudge())
print("replay reproduces the log:   ", serialize_run(replayed) == serialize_run(run))
