"""Pipeline semantics: fan-out, early stop, selection, token accounting."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import pytest

from verifine import (
    BackendCallError,
    Candidate,
    PipelineConfig,
    PipelineError,
    Role,
    RoundRecord,
    SelectionError,
    SimulatedJudge,
    SimulatorBackend,
    SimulatorParams,
    Termination,
    ThreadRecord,
    Verdict,
    call_seed_for,
    derive_seed,
    latent_correctness,
    run_pipeline,
    run_thread,
    select_final,
    serialize_run,
    token_totals,
    verify_candidate,
)
from verifine.backends import CallContext

from .conftest import make_config


@dataclass
class ScriptedBackend:
    """Deterministic stub: verdict pattern and failures keyed by indices."""

    judgments: dict[tuple[int, int, int], bool] = field(default_factory=dict)
    fail_threads: frozenset = frozenset()
    refine_feedback: list = field(default_factory=list)
    backend_id: str = "scripted"

    def _candidate(self, problem, ctx, role):
        return Candidate(
            problem_id=problem.id,
            thread_index=ctx.thread_index,
            round_index=ctx.round_index,
            role=role,
            explanation="",
            source_code=f"// scripted t{ctx.thread_index} r{ctx.round_index}",
            token_count=10,
        )

    def call_generate(self, problem, ctx):
        if ctx.thread_index in self.fail_threads:
            raise BackendCallError("scripted transport failure", attempts=3)
        return self._candidate(problem, ctx, Role.GENERATION)

    def call_verify(self, problem, candidate, ctx):
        judgment = self.judgments.get((ctx.thread_index, ctx.round_index, ctx.verdict_index), False)
        return Verdict(
            judgment=judgment,
            reasoning=f"reason-{ctx.thread_index}-{ctx.round_index}-{ctx.verdict_index}",
            token_count=1,
        )

    def call_refine(self, problem, candidate, feedback, ctx):
        self.refine_feedback.append((ctx.thread_index, ctx.round_index, feedback))
        return self._candidate(problem, ctx, Role.REFINEMENT)


def _thread_with_scores(thread_index: int, scores: list[int], verdicts_per_round: int = 8):
    rounds = []
    for i, score in enumerate(scores, start=1):
        role = Role.GENERATION if i == 1 else Role.REFINEMENT
        candidate = Candidate(
            problem_id="toy", thread_index=thread_index, round_index=i, role=role,
            explanation="", source_code="x", token_count=1,
        )
        verdicts = tuple(
            Verdict(judgment=(j < score), reasoning="", token_count=0)
            for j in range(verdicts_per_round)
        )
        rounds.append(RoundRecord(candidate=candidate, verdicts=verdicts, score=score))
    termination = (
        Termination.UNANIMOUS_EARLY_STOP
        if scores and scores[-1] == verdicts_per_round
        else Termination.MAX_ROUNDS_REACHED
    )
    return ThreadRecord(thread_index=thread_index, rounds=tuple(rounds), termination=termination)


class TestRunPipeline:
    def test_minimal_perfect_run(self, toy_problem):
        backend = SimulatorBackend(SimulatorParams(1.0, 1.0, 1.0, 0.0, 0.0))
        config = make_config(threads=1, max_rounds=1, verdicts_per_round=1)
        run = run_pipeline(toy_problem, config, backend)
        assert len(run.threads) == 1
        assert len(run.threads[0].rounds) == 1
        assert run.threads[0].termination is Termination.UNANIMOUS_EARLY_STOP
        assert (run.selected.thread_index, run.selected.round_index) == (0, 1)

    def test_two_threads_selects_higher_score(self, toy_problem):
        backend = ScriptedBackend(judgments={(1, 1, 0): True, (1, 1, 1): True, (0, 1, 0): True})
        config = make_config(threads=2, max_rounds=1, verdicts_per_round=2)
        run = run_pipeline(toy_problem, config, backend)
        assert run.selected.thread_index == 1
        assert run.threads[0].rounds[0].score == 1
        assert run.threads[1].rounds[0].score == 2

    def test_seeded_run_matches_exhaustive_recomputation(self, toy_problem, sim_backend):
        config = make_config(threads=4, max_rounds=4, verdicts_per_round=2, rng_seed=77)
        run = run_pipeline(toy_problem, config, sim_backend)

        # independent recomputation of every seeded decision, round by round
        entries = []
        for t in range(config.threads):
            prior = None
            feedback = None
            for m in range(1, config.max_rounds + 1):
                role = Role.GENERATION if m == 1 else Role.REFINEMENT
                ctx = CallContext(
                    thread_index=t, round_index=m,
                    call_seed=call_seed_for(config.rng_seed, t, m, role),
                    max_tokens=config.max_generation_tokens,
                    temperature=config.temperature,
                )
                if m == 1:
                    candidate = sim_backend.call_generate(toy_problem, ctx)
                else:
                    candidate = sim_backend.call_refine(toy_problem, prior, feedback, ctx)
                verdicts = []
                for j in range(config.verdicts_per_round):
                    vctx = CallContext(
                        thread_index=t, round_index=m,
                        call_seed=call_seed_for(config.rng_seed, t, m, Role.VERIFICATION, j),
                        max_tokens=config.verification_tokens,
                        temperature=config.temperature,
                        verdict_index=j,
                    )
                    verdicts.append(sim_backend.call_verify(toy_problem, candidate, vctx))
                recorded = run.threads[t].rounds[m - 1]
                assert recorded.candidate == candidate
                assert tuple(recorded.verdicts) == tuple(verdicts)
                score = sum(v.judgment for v in verdicts)
                entries.append((score, m, t))
                if score == config.verdicts_per_round:
                    break
                negatives = [v for v in verdicts if not v.judgment]
                pick = random.Random(derive_seed(config.rng_seed, t, m, "negative_pick"))
                feedback = negatives[pick.randrange(len(negatives))].reasoning
                prior = candidate
            assert len(run.threads[t].rounds) == m if score == config.verdicts_per_round else True

        best = max(entries, key=lambda e: (e[0], -e[1]))
        tied = sorted(t for s, m, t in entries if (s, m) == (best[0], best[1]))
        if len(tied) == 1:
            expected_thread = tied[0]
        else:
            draw = random.Random(derive_seed(config.rng_seed, "selection"))
            expected_thread = tied[draw.randrange(len(tied))]
        assert (run.selected.thread_index, run.selected.round_index) == (expected_thread, best[1])

    def test_judge_attaches_exec_results_everywhere(self, toy_problem, sim_backend, sim_judge):
        config = make_config(threads=2, max_rounds=2, judge_attached=True)
        run = run_pipeline(toy_problem, config, sim_backend, sim_judge)
        for thread in run.threads:
            for rnd in thread.rounds:
                assert rnd.exec_result is not None
                assert rnd.exec_result.binary_score == int(latent_correctness(rnd.candidate))

    def test_judge_attached_without_judge_is_an_error(self, toy_problem, sim_backend):
        with pytest.raises(PipelineError):
            run_pipeline(toy_problem, make_config(judge_attached=True), sim_backend)

    def test_failed_thread_is_excluded_not_fatal(self, toy_problem):
        backend = ScriptedBackend(judgments={(0, 1, 0): True}, fail_threads=frozenset({1}))
        config = make_config(threads=2, max_rounds=1, verdicts_per_round=1)
        run = run_pipeline(toy_problem, config, backend)
        assert run.threads[1].termination is Termination.FAILED
        assert run.threads[1].failure is not None
        assert run.threads[1].rounds == ()
        assert run.selected.thread_index == 0

    def test_all_threads_failed_is_a_pipeline_error(self, toy_problem):
        backend = ScriptedBackend(fail_threads=frozenset({0, 1}))
        with pytest.raises(PipelineError, match="failed"):
            run_pipeline(toy_problem, make_config(threads=2), backend)

    def test_thread_independence_under_thread_count_changes(self, toy_problem, sim_backend):
        big = run_pipeline(toy_problem, make_config(threads=4, max_rounds=3, rng_seed=5), sim_backend)
        small = run_pipeline(toy_problem, make_config(threads=2, max_rounds=3, rng_seed=5), sim_backend)
        for t in range(2):
            assert big.threads[t].rounds == small.threads[t].rounds

    def test_concurrency_cap_does_not_change_results(self, toy_problem, sim_backend):
        import dataclasses

        seq = run_pipeline(toy_problem, make_config(threads=4, max_rounds=3, concurrency_cap=1, rng_seed=8), sim_backend)
        par = run_pipeline(toy_problem, make_config(threads=4, max_rounds=3, concurrency_cap=6, rng_seed=8), sim_backend)
        # identical apart from the recorded cap itself
        par_normalized = dataclasses.replace(par, config=dataclasses.replace(par.config, concurrency_cap=1))
        assert serialize_run(seq) == serialize_run(par_normalized)

    def test_events_are_emitted(self, toy_problem, sim_backend):
        events = []
        run_pipeline(toy_problem, make_config(), sim_backend, on_event=events.append)
        kinds = {e["event"] for e in events}
        assert {"thread_started", "round_finished", "selected"} <= kinds


class TestRunThread:
    def test_unanimous_first_round_stops_immediately(self, toy_problem):
        backend = SimulatorBackend(SimulatorParams(1.0, 1.0, 1.0, 0.0, 0.0))
        config = make_config(threads=1, max_rounds=5, verdicts_per_round=4)
        thread = run_thread(toy_problem, 0, config, backend)
        assert len(thread.rounds) == 1
        assert thread.termination is Termination.UNANIMOUS_EARLY_STOP
        assert thread.rounds[0].score == 4

    def test_never_unanimous_runs_all_rounds(self, toy_problem):
        backend = SimulatorBackend(SimulatorParams(0.0, 1.0, 1.0, 0.0, 0.0))
        config = make_config(threads=1, max_rounds=3, verdicts_per_round=2)
        thread = run_thread(toy_problem, 0, config, backend)
        assert len(thread.rounds) == 3
        assert thread.termination is Termination.MAX_ROUNDS_REACHED
        assert [r.score for r in thread.rounds] == [0, 0, 0]

    def test_refinement_gets_a_seeded_negative_verdicts_reasoning(self, toy_problem):
        # round 1 verdicts: (True, False, False) -> feedback is one of the two
        # negative reasonings, picked by the documented seeded draw
        backend = ScriptedBackend(
            judgments={(0, 1, 0): True, (0, 1, 1): False, (0, 1, 2): False}
        )
        config = make_config(threads=1, max_rounds=2, verdicts_per_round=3, rng_seed=13)
        run_thread(toy_problem, 0, config, backend)
        assert len(backend.refine_feedback) == 1
        _, _, feedback = backend.refine_feedback[0]
        negatives = ["reason-0-1-1", "reason-0-1-2"]
        assert feedback in negatives
        pick = random.Random(derive_seed(config.rng_seed, 0, 1, "negative_pick"))
        assert feedback == negatives[pick.randrange(2)]

    def test_unanimous_at_final_round_counts_as_early_stop(self, toy_problem):
        backend = ScriptedBackend(judgments={(0, 2, 0): True})
        config = make_config(threads=1, max_rounds=2, verdicts_per_round=1)
        thread = run_thread(toy_problem, 0, config, backend)
        assert len(thread.rounds) == 2
        assert thread.termination is Termination.UNANIMOUS_EARLY_STOP

    def test_degenerate_probability_corners_are_hand_computable(self, toy_problem):
        # wrong first shot, perfect verifier, guaranteed fix: exactly 2 rounds,
        # scores (0, V), early stop, second round selected
        backend = SimulatorBackend(SimulatorParams(0.0, 1.0, 1.0, 1.0, 0.0))
        for seed in range(10):
            config = make_config(threads=1, max_rounds=4, verdicts_per_round=3, rng_seed=seed)
            run = run_pipeline(toy_problem, config, backend)
            thread = run.threads[0]
            assert [r.score for r in thread.rounds] == [0, 3]
            assert thread.termination is Termination.UNANIMOUS_EARLY_STOP
            assert (run.selected.thread_index, run.selected.round_index) == (0, 2)
        # guaranteed break on refinement, blind verifier: alternating latents
        backend = SimulatorBackend(SimulatorParams(1.0, 0.0, 1.0, 0.0, 1.0))
        config = make_config(threads=1, max_rounds=3, verdicts_per_round=1, rng_seed=0)
        run = run_pipeline(toy_problem, config, backend)
        latents = [latent_correctness(r.candidate) for r in run.threads[0].rounds]
        assert latents == [True, False, False]
        assert [r.score for r in run.threads[0].rounds] == [0, 0, 0]


class TestVerifyCandidate:
    def test_single_verdict(self, toy_problem, sim_backend):
        config = make_config(threads=1, max_rounds=1, verdicts_per_round=1)
        candidate = sim_backend.call_generate(
            toy_problem, CallContext(0, 1, call_seed_for(config.rng_seed, 0, 1, Role.GENERATION), 1000)
        )
        verdicts = verify_candidate(toy_problem, candidate, 1, config, sim_backend)
        assert len(verdicts) == 1

    def test_perfect_verifier_is_unanimous_on_correct_latent(self, toy_problem):
        backend = SimulatorBackend(SimulatorParams(1.0, 1.0, 1.0, 0.0, 0.0))
        config = make_config(threads=1, max_rounds=1, verdicts_per_round=8)
        candidate = backend.call_generate(
            toy_problem, CallContext(0, 1, call_seed_for(config.rng_seed, 0, 1, Role.GENERATION), 1000)
        )
        verdicts = verify_candidate(toy_problem, candidate, 8, config, backend)
        assert [v.judgment for v in verdicts] == [True] * 8

    def test_seeded_judgment_vector_matches_recomputation(self, toy_problem):
        backend = SimulatorBackend(SimulatorParams(1.0, 0.5, 1.0, 0.0, 0.0))
        config = make_config(threads=1, max_rounds=1, verdicts_per_round=4, rng_seed=29)
        candidate = backend.call_generate(
            toy_problem, CallContext(0, 1, call_seed_for(config.rng_seed, 0, 1, Role.GENERATION), 100_000)
        )
        verdicts = verify_candidate(toy_problem, candidate, 4, config, backend)
        recomputed = [
            backend.call_verify(
                toy_problem,
                candidate,
                CallContext(
                    0, 1, call_seed_for(config.rng_seed, 0, 1, Role.VERIFICATION, j),
                    config.verification_tokens, verdict_index=j,
                ),
            )
            for j in range(4)
        ]
        assert verdicts == recomputed

    def test_order_is_verdict_index_order_despite_concurrency(self, toy_problem):
        import threading
        import time

        class SlowBackend(ScriptedBackend):
            def call_verify(self, problem, candidate, ctx):
                time.sleep(0.02 * (3 - ctx.verdict_index))  # later indices finish first
                return super().call_verify(problem, candidate, ctx)

        backend = SlowBackend()
        config = make_config(threads=1, max_rounds=1, verdicts_per_round=4, concurrency_cap=4)
        candidate = backend.call_generate(toy_problem, CallContext(0, 1, 1, 100))
        slots = threading.BoundedSemaphore(4)
        verdicts = verify_candidate(toy_problem, candidate, 4, config, backend, slots)
        assert [v.reasoning for v in verdicts] == [f"reason-0-1-{j}" for j in range(4)]


class TestSelectFinal:
    def test_earlier_round_wins_score_ties(self):
        threads = [
            _thread_with_scores(0, [5]),
            _thread_with_scores(1, [2, 5]),
            _thread_with_scores(2, [3]),
        ]
        selected = select_final(threads, rng_seed=1)
        assert (selected.thread_index, selected.round_index) == (0, 1)

    def test_single_candidate(self):
        assert select_final([_thread_with_scores(0, [3])], rng_seed=1).thread_index == 0

    def test_failed_threads_are_excluded(self):
        failed = ThreadRecord(0, (), Termination.FAILED, failure="boom")
        threads = [failed, _thread_with_scores(1, [1])]
        assert select_final(threads, rng_seed=1).thread_index == 1
        with pytest.raises(SelectionError):
            select_final([failed], rng_seed=1)

    def test_tie_break_is_seeded_and_unbiased(self):
        threads = [_thread_with_scores(0, [4]), _thread_with_scores(1, [4])]
        first = select_final(threads, rng_seed=123)
        assert select_final(threads, rng_seed=123) == first  # repeatable
        picks = sum(select_final(threads, rng_seed=s).thread_index for s in range(10_000))
        assert 0.48 <= picks / 10_000 <= 0.52  # each side 50% +- 2%

    def test_selection_never_strictly_beaten(self, toy_problem, sim_backend):
        for seed in range(25):
            run = run_pipeline(
                toy_problem, make_config(threads=3, max_rounds=3, rng_seed=1000 + seed), sim_backend
            )
            sel = run.threads[run.selected.thread_index].rounds[run.selected.round_index - 1]
            for thread in run.threads:
                for idx, rnd in enumerate(thread.rounds, start=1):
                    beats = rnd.score > sel.score or (
                        rnd.score == sel.score and idx < run.selected.round_index
                    )
                    assert not beats


class TestTokenTotals:
    def test_arithmetic_example(self, toy_problem):
        backend = ScriptedBackend(judgments={(0, 1, 0): True})

        class TokensBackend(ScriptedBackend):
            def call_generate(self, problem, ctx):
                c = super().call_generate(problem, ctx)
                return Candidate(
                    problem_id=c.problem_id, thread_index=c.thread_index, round_index=c.round_index,
                    role=c.role, explanation=c.explanation, source_code=c.source_code, token_count=100,
                )

            def call_verify(self, problem, candidate, ctx):
                v = super().call_verify(problem, candidate, ctx)
                return Verdict(judgment=v.judgment, reasoning=v.reasoning, token_count=30 + 10 * ctx.verdict_index)

        backend = TokensBackend(judgments={(0, 1, 0): True, (0, 1, 1): True})
        config = make_config(threads=1, max_rounds=1, verdicts_per_round=2)
        run = run_pipeline(toy_problem, config, backend)
        totals = token_totals(run)
        assert totals["total"] == 170 == run.total_tokens
        assert totals["per_role"] == {"generation": 100, "verification": 70, "refinement": 0}
        assert totals["per_thread"] == {0: 170}

    def test_breakdowns_sum_to_total_and_respect_budget_bound(self, toy_problem, sim_backend):
        config = make_config(threads=3, max_rounds=3, verdicts_per_round=2, rng_seed=17)
        run = run_pipeline(toy_problem, config, sim_backend)
        totals = token_totals(run)
        assert sum(totals["per_role"].values()) == totals["total"]
        assert sum(totals["per_thread"].values()) == totals["total"]
        bound = config.threads * config.max_rounds * (
            config.max_generation_tokens + config.verdicts_per_round * config.verification_tokens
        )
        assert totals["total"] <= bound


def test_perfect_verifier_selection_equals_oracle_pass_at_n(toy_problem):
    backend = SimulatorBackend(SimulatorParams(0.3, 1.0, 1.0, 0.0, 0.0))
    judge = SimulatedJudge()
    for seed in range(50):
        config = make_config(
            threads=4, max_rounds=1, verdicts_per_round=2, rng_seed=seed, judge_attached=True
        )
        run = run_pipeline(toy_problem, config, backend, judge)
        selected = run.threads[run.selected.thread_index].rounds[run.selected.round_index - 1]
        oracle = any(
            rnd.exec_result.binary_score == 1 for t in run.threads for rnd in t.rounds
        )
        assert (selected.exec_result.binary_score == 1) == oracle
