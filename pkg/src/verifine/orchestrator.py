"""End-to-end pipeline execution.

Spawns the configured number of independent solution threads, runs each one
through up to max_rounds of solve -> verify -> refine, applies unanimous
early termination, and selects the final answer across every round of every
thread by verdict score (earlier rounds win ties, remaining ties are broken
by a seeded draw).
"""

from __future__ import annotations

import random
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

from .backends import Backend, BackendCallError, CallContext, call_seed_for, derive_seed
from .domain import (
    Candidate,
    PipelineConfig,
    Problem,
    Role,
    RoundRecord,
    RunRecord,
    Selection,
    Termination,
    ThreadRecord,
    Verdict,
    recompute_total_tokens,
    validate_run,
)

EventCallback = Callable[[dict], None]


class PipelineError(RuntimeError):
    pass


class SelectionError(PipelineError):
    pass


def _emit(on_event: EventCallback | None, event: dict) -> None:
    if on_event is not None:
        on_event(event)


def verify_candidate(
    problem: Problem,
    candidate: Candidate,
    verdicts_per_round: int,
    config: PipelineConfig,
    backend: Backend,
    call_slots: threading.Semaphore | None = None,
) -> list[Verdict]:
    """Collect the round's verdicts via independent calls with distinct seeds.

    Results are ordered by verdict index regardless of completion order.
    """
    if verdicts_per_round < 1:
        raise PipelineError("verdicts_per_round must be >= 1")

    def one(j: int) -> Verdict:
        ctx = CallContext(
            thread_index=candidate.thread_index,
            round_index=candidate.round_index,
            call_seed=call_seed_for(
                config.rng_seed, candidate.thread_index, candidate.round_index,
                Role.VERIFICATION, j,
            ),
            max_tokens=config.verification_tokens,
            temperature=config.temperature,
            verdict_index=j,
        )
        if call_slots is None:
            return backend.call_verify(problem, candidate, ctx)
        with call_slots:
            return backend.call_verify(problem, candidate, ctx)

    if verdicts_per_round == 1 or call_slots is None:
        return [one(j) for j in range(verdicts_per_round)]
    with ThreadPoolExecutor(max_workers=verdicts_per_round) as pool:
        return list(pool.map(one, range(verdicts_per_round)))


def run_thread(
    problem: Problem,
    thread_index: int,
    config: PipelineConfig,
    backend: Backend,
    judge=None,
    call_slots: threading.Semaphore | None = None,
    on_event: EventCallback | None = None,
) -> ThreadRecord:
    """One solution thread: rounds of solve -> verify, refining on feedback.

    Round 1 generates from scratch; each later round refines the previous
    candidate using one randomly chosen negative verdict's reasoning. The
    thread stops early the moment a round's verdicts are unanimously
    positive. Exhausted backend retries mark the thread failed, keeping the
    rounds that completed.
    """
    _emit(on_event, {"event": "thread_started", "problem_id": problem.id, "thread": thread_index})
    rounds: list[RoundRecord] = []
    prior: Candidate | None = None
    feedback: str | None = None
    try:
        for round_index in range(1, config.max_rounds + 1):
            role = Role.GENERATION if round_index == 1 else Role.REFINEMENT
            ctx = CallContext(
                thread_index=thread_index,
                round_index=round_index,
                call_seed=call_seed_for(config.rng_seed, thread_index, round_index, role),
                max_tokens=config.max_generation_tokens,
                temperature=config.temperature,
            )
            if call_slots is None:
                candidate = (
                    backend.call_generate(problem, ctx)
                    if role is Role.GENERATION
                    else backend.call_refine(problem, prior, feedback, ctx)
                )
            else:
                with call_slots:
                    candidate = (
                        backend.call_generate(problem, ctx)
                        if role is Role.GENERATION
                        else backend.call_refine(problem, prior, feedback, ctx)
                    )
            verdicts = verify_candidate(
                problem, candidate, config.verdicts_per_round, config, backend, call_slots
            )
            score = sum(1 for v in verdicts if v.judgment)
            exec_result = judge.judge_solution(problem, candidate) if judge is not None else None
            rounds.append(
                RoundRecord(
                    candidate=candidate,
                    verdicts=tuple(verdicts),
                    score=score,
                    exec_result=exec_result,
                )
            )
            _emit(
                on_event,
                {
                    "event": "round_finished",
                    "problem_id": problem.id,
                    "thread": thread_index,
                    "round": round_index,
                    "score": score,
                    "tokens": candidate.token_count + sum(v.token_count for v in verdicts),
                },
            )
            if score == config.verdicts_per_round:
                return ThreadRecord(
                    thread_index=thread_index,
                    rounds=tuple(rounds),
                    termination=Termination.UNANIMOUS_EARLY_STOP,
                )
            negatives = [v for v in verdicts if not v.judgment]
            pick = random.Random(
                derive_seed(config.rng_seed, thread_index, round_index, "negative_pick")
            )
            feedback = negatives[pick.randrange(len(negatives))].reasoning
            prior = candidate
        return ThreadRecord(
            thread_index=thread_index,
            rounds=tuple(rounds),
            termination=Termination.MAX_ROUNDS_REACHED,
        )
    except BackendCallError as exc:
        _emit(
            on_event,
            {
                "event": "thread_failed",
                "problem_id": problem.id,
                "thread": thread_index,
                "error": str(exc),
                "attempts": exc.attempts,
            },
        )
        return ThreadRecord(
            thread_index=thread_index,
            rounds=tuple(rounds),
            termination=Termination.FAILED,
            failure=str(exc),
        )


def select_final(threads: Sequence[ThreadRecord], rng_seed: int) -> Selection:
    """Pick the round with the most positive verdicts across all threads.

    Ties prefer earlier rounds (round index compared globally across
    threads); rounds still tied are settled by one draw from the run's
    seeded generator, so selection is deterministic given the seed.
    """
    entries: list[tuple[int, int, int]] = []  # (score, round_index, thread_index)
    for thread in threads:
        if thread.termination is Termination.FAILED:
            continue
        for round_index, rnd in enumerate(thread.rounds, start=1):
            entries.append((rnd.score, round_index, thread.thread_index))
    if not entries:
        raise SelectionError("no completed rounds to select from")
    best_score = max(e[0] for e in entries)
    best_round = min(e[1] for e in entries if e[0] == best_score)
    tied = sorted(e[2] for e in entries if e[0] == best_score and e[1] == best_round)
    if len(tied) == 1:
        return Selection(thread_index=tied[0], round_index=best_round)
    draw = random.Random(derive_seed(rng_seed, "selection"))
    return Selection(thread_index=tied[draw.randrange(len(tied))], round_index=best_round)


def run_pipeline(
    problem: Problem,
    config: PipelineConfig,
    backend: Backend,
    judge=None,
    on_event: EventCallback | None = None,
) -> RunRecord:
    """Execute the full pipeline and return its validated RunRecord."""
    if config.judge_attached and judge is None:
        raise PipelineError("config.judge_attached is set but no judge was provided")

    # concurrency_cap == 1 degenerates to a plain sequential loop; results are
    # identical either way because every call is independently seeded.
    call_slots = None if config.concurrency_cap == 1 else threading.BoundedSemaphore(config.concurrency_cap)

    def task(thread_index: int) -> ThreadRecord:
        return run_thread(problem, thread_index, config, backend, judge, call_slots, on_event)

    if call_slots is None or config.threads == 1:
        threads = [task(i) for i in range(config.threads)]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            futures = [pool.submit(task, i) for i in range(config.threads)]
            threads = [f.result() for f in futures]

    if all(t.termination is Termination.FAILED for t in threads):
        raise PipelineError(f"all {config.threads} threads failed for problem {problem.id!r}")

    selected = select_final(threads, config.rng_seed)
    run = RunRecord(
        problem_id=problem.id,
        config=config,
        threads=tuple(threads),
        selected=selected,
        total_tokens=recompute_total_tokens(tuple(threads)),
        rng_seed=config.rng_seed,
    )
    validate_run(run)
    _emit(
        on_event,
        {
            "event": "selected",
            "problem_id": problem.id,
            "thread": selected.thread_index,
            "round": selected.round_index,
            "total_tokens": run.total_tokens,
        },
    )
    return run


def token_totals(run: RunRecord) -> dict:
    """Total spend plus per-role and per-thread breakdowns (they sum to total)."""
    per_role = {role.value: 0 for role in (Role.GENERATION, Role.VERIFICATION, Role.REFINEMENT)}
    per_thread: dict[int, int] = {}
    for thread in run.threads:
        spent = 0
        for rnd in thread.rounds:
            per_role[rnd.candidate.role.value] += rnd.candidate.token_count
            spent += rnd.candidate.token_count
            for v in rnd.verdicts:
                per_role[Role.VERIFICATION.value] += v.token_count
                spent += v.token_count
        per_thread[thread.thread_index] = spent
    return {"total": sum(per_role.values()), "per_role": per_role, "per_thread": per_thread}
