"""Model-call backends: seeded simulator, HTTP chat endpoint, and replay.

Every backend answers the same three calls (generate / verify / refine) and
reports token usage and truncation on each result. Calls are identified by a
CallContext whose seed makes any single call reproducible in isolation; the
seed is derived from (run seed, thread, round, role, verdict index).
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import random
import time
from dataclasses import dataclass
from typing import Protocol

import requests

from .domain import Candidate, ParseStatus, Problem, Role, RunRecord, ValidationError, Verdict
from .judge import extract_source
from .prompts import render_prompt

logger = logging.getLogger(__name__)

VERDICT_CORRECT_LINE = "Verdict: Correct."
VERDICT_INCORRECT_LINE = "Verdict: Incorrect."


class BackendError(Exception):
    """Base class for backend failures."""


class BackendCallError(BackendError):
    """A call failed for good, after ``attempts`` tries."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from a tuple of identifying parts.

    Uses a keyed hash rather than Python's salted ``hash`` so seeds are
    identical across processes and platforms.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def call_seed_for(run_seed: int, thread_index: int, round_index: int, role: Role, verdict_index: int = 0) -> int:
    return derive_seed(run_seed, thread_index, round_index, role.value, verdict_index)


@dataclass(frozen=True, slots=True)
class CallContext:
    """Identity and budget of one backend call."""

    thread_index: int
    round_index: int
    call_seed: int
    max_tokens: int
    temperature: float = 1.0
    verdict_index: int = 0


@dataclass(frozen=True, slots=True)
class BackendRequest:
    """A fully rendered request, as handed to a model endpoint."""

    role: Role
    rendered_prompt: str
    max_tokens: int
    temperature: float
    call_seed: int

    def __post_init__(self) -> None:
        if not self.rendered_prompt:
            raise ValidationError("BackendRequest.rendered_prompt must be nonempty")


class Backend(Protocol):
    backend_id: str

    def call_generate(self, problem: Problem, ctx: CallContext) -> Candidate: ...

    def call_verify(self, problem: Problem, candidate: Candidate, ctx: CallContext) -> Verdict: ...

    def call_refine(
        self, problem: Problem, candidate: Candidate, feedback: str, ctx: CallContext
    ) -> Candidate: ...


def parse_verdict(raw_completion: str, token_count: int = 0) -> Verdict:
    """Parse a verification completion; total on any input.

    The first line must be exactly one of the two allowed verdict lines
    (surrounding whitespace tolerated, case-sensitive); everything after it
    is the reasoning. Anything else is malformed and conservatively counts
    as a negative judgment, with the full text kept as reasoning.
    """
    first, sep, rest = raw_completion.partition("\n")
    head = first.strip()
    if head == VERDICT_CORRECT_LINE:
        return Verdict(judgment=True, reasoning=rest, token_count=token_count)
    if head == VERDICT_INCORRECT_LINE:
        return Verdict(judgment=False, reasoning=rest, token_count=token_count)
    return Verdict(
        judgment=False,
        reasoning=raw_completion,
        token_count=token_count,
        parse_status=ParseStatus.MALFORMED,
    )


# ---------------------------------------------------------------------------
# Seeded simulator
# ---------------------------------------------------------------------------

_LATENT_CORRECT = "// latent: correct"
_LATENT_INCORRECT = "// latent: incorrect"

_POSITIVE_REASONING = (
    "Simulated review: traced the main cases and boundary inputs; "
    "no failing scenario found."
)
_NEGATIVE_REASONING = (
    "Simulated review: found a failing scenario on a boundary input where "
    "the attempt produces the wrong result."
)


@dataclass(frozen=True)
class SimulatorParams:
    """Behavioral knobs of the stochastic backend simulator.

    ``p_first_correct`` is the chance a fresh generation is correct;
    ``verifier_tpr`` / ``verifier_tnr`` are the chances a correct / incorrect
    solution is judged as such; ``p_refine_fix`` / ``p_refine_break`` are the
    chances refinement fixes an incorrect solution or breaks a correct one.
    Token counts per role are drawn from a log-normal with the given mean (in
    tokens) and multiplicative spread (sigma of the underlying normal).
    """

    p_first_correct: float
    verifier_tpr: float
    verifier_tnr: float
    p_refine_fix: float
    p_refine_break: float
    generation_token_mean: float = 800.0
    generation_token_spread: float = 0.25
    verification_token_mean: float = 300.0
    verification_token_spread: float = 0.25
    refinement_token_mean: float = 700.0
    refinement_token_spread: float = 0.25

    def __post_init__(self) -> None:
        for name in ("p_first_correct", "verifier_tpr", "verifier_tnr", "p_refine_fix", "p_refine_break"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"SimulatorParams.{name} must be in [0, 1]")
        for name in (
            "generation_token_mean",
            "generation_token_spread",
            "verification_token_mean",
            "verification_token_spread",
            "refinement_token_mean",
            "refinement_token_spread",
        ):
            if getattr(self, name) <= 0:
                raise ValidationError(f"SimulatorParams.{name} must be > 0")

    def token_params(self, role: Role) -> tuple[float, float]:
        if role is Role.GENERATION:
            return self.generation_token_mean, self.generation_token_spread
        if role is Role.VERIFICATION:
            return self.verification_token_mean, self.verification_token_spread
        return self.refinement_token_mean, self.refinement_token_spread


def latent_correctness(candidate: Candidate) -> bool:
    """Read the simulator's hidden ground-truth channel.

    Only the test harness and the simulated judge stub may call this; the
    verification path sees correctness solely through its tpr/tnr noise.
    """
    if candidate.source_code.startswith(_LATENT_CORRECT):
        return True
    if candidate.source_code.startswith(_LATENT_INCORRECT):
        return False
    raise ValueError("candidate does not carry a simulator latent marker")


class SimulatorBackend:
    """Stochastic backend whose every call is a pure function of its seed."""

    def __init__(self, params: SimulatorParams):
        self.params = params
        self.backend_id = "simulator"

    def _token_draw(self, rng: random.Random, role: Role, max_tokens: int) -> tuple[int, bool]:
        mean, spread = self.params.token_params(role)
        mu = math.log(mean) - spread * spread / 2.0
        drawn = int(round(rng.lognormvariate(mu, spread)))
        drawn = max(1, drawn)
        if drawn >= max_tokens:
            return max_tokens, True
        return drawn, False

    def _solution(
        self, problem: Problem, ctx: CallContext, role: Role, correct: bool
    ) -> Candidate:
        rng = random.Random(ctx.call_seed)
        # Coin order is part of the seeded contract: correctness first, tokens second.
        latent = correct
        tokens, truncated = self._token_draw(rng, role, ctx.max_tokens)
        if truncated:
            # A cut-off program cannot pass execution.
            latent = False
        marker = _LATENT_CORRECT if latent else _LATENT_INCORRECT
        return Candidate(
            problem_id=problem.id,
            thread_index=ctx.thread_index,
            round_index=ctx.round_index,
            role=role,
            explanation=(
                f"Simulated attempt for {problem.id} "
                f"(thread {ctx.thread_index}, round {ctx.round_index})."
            ),
            source_code=f"{marker}\nint main() {{ return 0; }}\n",
            token_count=tokens,
            truncated=truncated,
        )

    def call_generate(self, problem: Problem, ctx: CallContext) -> Candidate:
        rng = random.Random(ctx.call_seed)
        correct = rng.random() < self.params.p_first_correct
        return self._solution(problem, ctx, Role.GENERATION, correct)

    def call_verify(self, problem: Problem, candidate: Candidate, ctx: CallContext) -> Verdict:
        rng = random.Random(ctx.call_seed)
        latent = latent_correctness(candidate)
        p_positive = self.params.verifier_tpr if latent else 1.0 - self.params.verifier_tnr
        positive = rng.random() < p_positive
        tokens, _ = self._token_draw(rng, Role.VERIFICATION, ctx.max_tokens)
        line = VERDICT_CORRECT_LINE if positive else VERDICT_INCORRECT_LINE
        reasoning = _POSITIVE_REASONING if positive else _NEGATIVE_REASONING
        return parse_verdict(f"{line}\n{reasoning}", token_count=tokens)

    def call_refine(
        self, problem: Problem, candidate: Candidate, feedback: str, ctx: CallContext
    ) -> Candidate:
        rng = random.Random(ctx.call_seed)
        prior = latent_correctness(candidate)
        if prior:
            correct = rng.random() >= self.params.p_refine_break
        else:
            correct = rng.random() < self.params.p_refine_fix
        return self._solution(problem, ctx, Role.REFINEMENT, correct)


class SimulatedJudge:
    """Ground-truth stub for simulator runs: decodes the latent channel."""

    def judge_solution(self, problem: Problem, candidate: Candidate):
        from .domain import ExecReport, ExecStatus

        if candidate.truncated:
            return ExecReport(
                status=ExecStatus.TRUNCATED_INPUT,
                passed=0,
                total=len(problem.tests),
                binary_score=0,
            )
        if latent_correctness(candidate):
            total = len(problem.tests)
            return ExecReport(
                status=ExecStatus.ACCEPTED,
                passed=total,
                total=total,
                binary_score=1,
                per_test=tuple((ExecStatus.ACCEPTED, 0) for _ in range(total)),
            )
        return ExecReport(
            status=ExecStatus.WRONG_ANSWER,
            passed=0,
            total=len(problem.tests),
            binary_score=0,
            per_test=((ExecStatus.WRONG_ANSWER, 0),),
        )


# ---------------------------------------------------------------------------
# HTTP chat endpoint
# ---------------------------------------------------------------------------


class HttpBackend:
    """Chat-completion-style JSON endpoint: message list in, text + usage out.

    Retries transport failures and 5xx/429 responses with exponential backoff
    (3 attempts by default, starting at 1 s). When a response omits usage
    data, token counts fall back to a character-count/4 estimate and
    ``usage_estimated`` is flipped on for the rest of the backend's life.
    """

    def __init__(
        self,
        url: str,
        model: str,
        api_key_env: str | None = None,
        timeout_s: float = 300.0,
        max_attempts: int = 3,
        backoff_s: float = 1.0,
    ):
        self.url = url
        self.model = model
        self.api_key = os.environ.get(api_key_env, "") if api_key_env else ""
        self.timeout_s = timeout_s
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.backend_id = f"http:{model}"
        self.usage_estimated = False

    def _post(self, request: BackendRequest) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.rendered_prompt}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "seed": request.call_seed,
        }
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = requests.post(self.url, json=body, headers=headers, timeout=self.timeout_s)
                if response.status_code >= 500 or response.status_code == 429:
                    raise BackendError(f"endpoint returned HTTP {response.status_code}")
                if response.status_code != 200:
                    raise BackendCallError(
                        f"endpoint returned HTTP {response.status_code}: {response.text[:200]}",
                        attempts=attempt,
                    )
                return response.json()
            except BackendCallError:
                raise
            except (requests.RequestException, BackendError, ValueError) as exc:
                last_error = exc
                if attempt < self.max_attempts:
                    delay = self.backoff_s * 2 ** (attempt - 1)
                    logger.warning("backend call failed (attempt %d/%d): %s", attempt, self.max_attempts, exc)
                    time.sleep(delay)
        raise BackendCallError(
            f"backend call failed after {self.max_attempts} attempts: {last_error}",
            attempts=self.max_attempts,
        )

    def _complete(self, request: BackendRequest) -> tuple[str, int, bool]:
        doc = self._post(request)
        try:
            choice = doc["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendCallError(f"malformed endpoint response: {exc}", attempts=1) from exc
        truncated = choice.get("finish_reason") == "length"
        usage = doc.get("usage") or {}
        tokens = usage.get("completion_tokens")
        if tokens is None:
            tokens = len(text) // 4
            if not self.usage_estimated:
                logger.warning("endpoint omitted usage data; falling back to len/4 token estimates")
            self.usage_estimated = True
        return text, int(tokens), truncated

    def call_generate(self, problem: Problem, ctx: CallContext) -> Candidate:
        request = BackendRequest(
            role=Role.GENERATION,
            rendered_prompt=render_prompt(Role.GENERATION, problem),
            max_tokens=ctx.max_tokens,
            temperature=ctx.temperature,
            call_seed=ctx.call_seed,
        )
        text, tokens, truncated = self._complete(request)
        explanation, source = extract_source(text)
        return Candidate(
            problem_id=problem.id,
            thread_index=ctx.thread_index,
            round_index=ctx.round_index,
            role=Role.GENERATION,
            explanation=explanation,
            source_code=source,
            token_count=tokens,
            truncated=truncated,
        )

    def call_verify(self, problem: Problem, candidate: Candidate, ctx: CallContext) -> Verdict:
        request = BackendRequest(
            role=Role.VERIFICATION,
            rendered_prompt=render_prompt(Role.VERIFICATION, problem, prior=candidate),
            max_tokens=ctx.max_tokens,
            temperature=ctx.temperature,
            call_seed=ctx.call_seed,
        )
        text, tokens, _ = self._complete(request)
        return parse_verdict(text, token_count=tokens)

    def call_refine(
        self, problem: Problem, candidate: Candidate, feedback: str, ctx: CallContext
    ) -> Candidate:
        request = BackendRequest(
            role=Role.REFINEMENT,
            rendered_prompt=render_prompt(Role.REFINEMENT, problem, prior=candidate, feedback=feedback),
            max_tokens=ctx.max_tokens,
            temperature=ctx.temperature,
            call_seed=ctx.call_seed,
        )
        text, tokens, truncated = self._complete(request)
        explanation, source = extract_source(text)
        return Candidate(
            problem_id=problem.id,
            thread_index=ctx.thread_index,
            round_index=ctx.round_index,
            role=Role.REFINEMENT,
            explanation=explanation,
            source_code=source,
            token_count=tokens,
            truncated=truncated,
        )


# ---------------------------------------------------------------------------
# Replay from a logged run
# ---------------------------------------------------------------------------


class ReplayBackend:
    """Serves candidates and verdicts back out of a recorded run, unchanged."""

    def __init__(self, run: RunRecord):
        self.run = run
        self.backend_id = "replay"

    def _round(self, ctx: CallContext):
        for thread in self.run.threads:
            if thread.thread_index == ctx.thread_index:
                if 1 <= ctx.round_index <= len(thread.rounds):
                    return thread.rounds[ctx.round_index - 1]
                raise BackendCallError(
                    f"replay log has no round {ctx.round_index} in thread {ctx.thread_index}",
                    attempts=1,
                )
        raise BackendCallError(f"replay log has no thread {ctx.thread_index}", attempts=1)

    def call_generate(self, problem: Problem, ctx: CallContext) -> Candidate:
        return self._round(ctx).candidate

    def call_verify(self, problem: Problem, candidate: Candidate, ctx: CallContext) -> Verdict:
        rnd = self._round(ctx)
        if not 0 <= ctx.verdict_index < len(rnd.verdicts):
            raise BackendCallError(
                f"replay log has no verdict {ctx.verdict_index} in round {ctx.round_index}",
                attempts=1,
            )
        return rnd.verdicts[ctx.verdict_index]

    def call_refine(
        self, problem: Problem, candidate: Candidate, feedback: str, ctx: CallContext
    ) -> Candidate:
        return self._round(ctx).candidate
