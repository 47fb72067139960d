"""Shared domain types, their invariants, and validation.

Every value here is a frozen dataclass: once constructed it is immutable and
safe to share across concurrent tasks. Local invariants are checked at
construction time; cross-object invariants (score sums, token totals,
selection targets) are checked by :func:`validate_run`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

SCHEMA_VERSION = 1


class ValidationError(ValueError):
    """An invariant violation; the message names the offending field."""


class Role(str, Enum):
    GENERATION = "generation"
    VERIFICATION = "verification"
    REFINEMENT = "refinement"


class CompareMode(str, Enum):
    EXACT = "exact"
    TOKEN_NORMALIZED = "token-normalized"


class ParseStatus(str, Enum):
    PARSED = "parsed"
    MALFORMED = "malformed"


class ExecStatus(str, Enum):
    ACCEPTED = "accepted"
    WRONG_ANSWER = "wrong_answer"
    TIME_LIMIT = "time_limit"
    RUNTIME_ERROR = "runtime_error"
    COMPILE_ERROR = "compile_error"
    TRUNCATED_INPUT = "truncated_input"


class Termination(str, Enum):
    UNANIMOUS_EARLY_STOP = "unanimous_early_stop"
    MAX_ROUNDS_REACHED = "max_rounds_reached"
    # Not part of the normal loop: the thread's backend calls exhausted their
    # retries and the thread keeps only its completed rounds.
    FAILED = "failed"


@dataclass(frozen=True, slots=True)
class TestCase:
    """One unit test: raw input bytes and the expected output bytes."""

    __test__ = False  # keep pytest from collecting this as a test class

    input: bytes
    expected_output: bytes


@dataclass(frozen=True, slots=True)
class Problem:
    """A problem statement plus its executable test suite and limits."""

    id: str
    statement: str
    tests: tuple[TestCase, ...]
    time_limit_ms: int
    memory_limit_mib: int
    compare_mode: CompareMode = CompareMode.EXACT

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("Problem.id must be nonempty")
        if not self.tests:
            raise ValidationError(f"Problem.tests must be nonempty (problem {self.id!r})")
        if self.time_limit_ms <= 0:
            raise ValidationError("Problem.time_limit_ms must be > 0")
        if self.memory_limit_mib <= 0:
            raise ValidationError("Problem.memory_limit_mib must be > 0")


@dataclass(frozen=True, slots=True)
class Candidate:
    """One model-produced solution at (thread_index, round_index).

    ``thread_index`` is 0-based, ``round_index`` is 1-based. Round 1 is always
    a fresh generation; later rounds are refinements of the previous round.
    """

    problem_id: str
    thread_index: int
    round_index: int
    role: Role
    explanation: str
    source_code: str
    token_count: int
    truncated: bool = False

    def __post_init__(self) -> None:
        if self.round_index < 1:
            raise ValidationError("Candidate.round_index must be >= 1")
        if (self.role is Role.GENERATION) != (self.round_index == 1):
            raise ValidationError(
                "Candidate.role must be generation iff round_index == 1 "
                f"(got role={self.role.value}, round_index={self.round_index})"
            )
        if self.role is Role.VERIFICATION:
            raise ValidationError("Candidate.role cannot be verification")
        if self.token_count < 0:
            raise ValidationError("Candidate.token_count must be >= 0")


@dataclass(frozen=True, slots=True)
class Verdict:
    """A single verification call's binary judgment plus its reasoning."""

    judgment: bool
    reasoning: str
    token_count: int
    parse_status: ParseStatus = ParseStatus.PARSED

    def __post_init__(self) -> None:
        if self.token_count < 0:
            raise ValidationError("Verdict.token_count must be >= 0")
        if self.parse_status is ParseStatus.MALFORMED and self.judgment:
            raise ValidationError("Verdict.judgment must be False when parse_status is malformed")


@dataclass(frozen=True, slots=True)
class ExecReport:
    """Ground-truth execution result of a candidate against the test suite."""

    status: ExecStatus
    passed: int
    total: int
    binary_score: int
    per_test: tuple[tuple[ExecStatus, int], ...] = ()
    diagnostics: str = ""

    def __post_init__(self) -> None:
        accepted = self.status is ExecStatus.ACCEPTED
        if self.binary_score != (1 if accepted else 0):
            raise ValidationError("ExecReport.binary_score must be 1 iff status is accepted")
        if accepted != (self.passed == self.total):
            raise ValidationError("ExecReport.status accepted iff passed == total")


@dataclass(frozen=True, slots=True)
class RoundRecord:
    """One candidate with its verdicts; ``score`` counts positive judgments."""

    candidate: Candidate
    verdicts: tuple[Verdict, ...]
    score: int
    exec_result: ExecReport | None = None

    def __post_init__(self) -> None:
        if self.score != sum(1 for v in self.verdicts if v.judgment):
            raise ValidationError("RoundRecord.score must equal the count of true judgments")


@dataclass(frozen=True, slots=True)
class ThreadRecord:
    thread_index: int
    rounds: tuple[RoundRecord, ...]
    termination: Termination
    failure: str | None = None

    def __post_init__(self) -> None:
        if (self.termination is Termination.FAILED) != (self.failure is not None):
            raise ValidationError("ThreadRecord.failure must be set iff termination is failed")


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    """Sizing and reproducibility knobs for one pipeline run."""

    threads: int
    max_rounds: int
    verdicts_per_round: int
    max_generation_tokens: int
    concurrency_cap: int
    rng_seed: int
    backend_id: str
    judge_attached: bool
    # Verification calls may use their own cap; None means "same as generation".
    max_verification_tokens: int | None = None
    temperature: float = 1.0

    def __post_init__(self) -> None:
        for name in ("threads", "max_rounds", "verdicts_per_round", "concurrency_cap"):
            if getattr(self, name) < 1:
                raise ValidationError(f"PipelineConfig.{name} must be >= 1")
        if self.max_generation_tokens < 1:
            raise ValidationError("PipelineConfig.max_generation_tokens must be >= 1")
        if self.max_verification_tokens is not None and self.max_verification_tokens < 1:
            raise ValidationError("PipelineConfig.max_verification_tokens must be >= 1")
        if self.temperature < 0:
            raise ValidationError("PipelineConfig.temperature must be >= 0")

    @property
    def verification_tokens(self) -> int:
        return self.max_verification_tokens or self.max_generation_tokens


@dataclass(frozen=True, slots=True)
class Selection:
    """Reference to the winning round: (thread_index, round_index)."""

    thread_index: int
    round_index: int


@dataclass(frozen=True, slots=True)
class RunRecord:
    """Complete trajectory of one pipeline run."""

    problem_id: str
    config: PipelineConfig
    threads: tuple[ThreadRecord, ...]
    selected: Selection
    total_tokens: int
    rng_seed: int
    schema_version: int = SCHEMA_VERSION


@dataclass(frozen=True, slots=True)
class ClipDistribution:
    """A response-length cap distribution; parameters are in tokens.

    Variants:
      - hard(limit): the cap is always exactly ``limit``
      - uniform(low, high): cap drawn uniformly from [low, high]
      - gaussian(mean, stddev): normal cap (not truncated to nonnegative)
      - truncexp(rate, upper): exponential with the given rate, renormalized
        on [0, upper]
    """

    variant: str
    params: tuple[float, ...]

    VARIANTS = ("hard", "uniform", "gaussian", "truncexp")

    def __post_init__(self) -> None:
        if self.variant not in self.VARIANTS:
            raise ValidationError(f"ClipDistribution.variant must be one of {self.VARIANTS}")
        p = self.params
        if self.variant == "hard":
            if len(p) != 1 or p[0] <= 0:
                raise ValidationError("ClipDistribution hard requires limit > 0")
        elif self.variant == "uniform":
            if len(p) != 2 or not (0 <= p[0] < p[1]):
                raise ValidationError("ClipDistribution uniform requires 0 <= low < high")
        elif self.variant == "gaussian":
            if len(p) != 2 or p[1] <= 0:
                raise ValidationError("ClipDistribution gaussian requires stddev > 0")
        elif self.variant == "truncexp":
            if len(p) != 2 or p[0] <= 0 or p[1] <= 0:
                raise ValidationError("ClipDistribution truncexp requires rate > 0 and upper > 0")

    @classmethod
    def hard(cls, limit: float) -> "ClipDistribution":
        return cls("hard", (float(limit),))

    @classmethod
    def uniform(cls, low: float, high: float) -> "ClipDistribution":
        return cls("uniform", (float(low), float(high)))

    @classmethod
    def gaussian(cls, mean: float, stddev: float) -> "ClipDistribution":
        return cls("gaussian", (float(mean), float(stddev)))

    @classmethod
    def truncexp(cls, rate: float, upper: float) -> "ClipDistribution":
        return cls("truncexp", (float(rate), float(upper)))


@dataclass(frozen=True, slots=True)
class ScalingPoint:
    """One point on an accuracy-vs-tokens scaling curve."""

    mean_tokens: float
    accuracy: float
    label: str = ""

    def __post_init__(self) -> None:
        if self.mean_tokens <= 0:
            raise ValidationError("ScalingPoint.mean_tokens must be > 0")


def recompute_total_tokens(threads: tuple[ThreadRecord, ...]) -> int:
    """Sum of token_count over every candidate and verdict in the run."""
    total = 0
    for thread in threads:
        for rnd in thread.rounds:
            total += rnd.candidate.token_count
            total += sum(v.token_count for v in rnd.verdicts)
    return total


def validate_run(run: RunRecord) -> None:
    """Check every cross-object RunRecord invariant; raise ValidationError."""
    cfg = run.config
    if run.schema_version != SCHEMA_VERSION:
        raise ValidationError(
            f"RunRecord.schema_version {run.schema_version} is not the supported {SCHEMA_VERSION}"
        )
    if len(run.threads) != cfg.threads:
        raise ValidationError(
            f"RunRecord.threads has {len(run.threads)} entries, config.threads is {cfg.threads}"
        )
    if run.rng_seed != cfg.rng_seed:
        raise ValidationError("RunRecord.rng_seed must equal config.rng_seed")

    for thread in run.threads:
        failed = thread.termination is Termination.FAILED
        if failed:
            if len(thread.rounds) >= cfg.max_rounds:
                raise ValidationError(
                    f"ThreadRecord.rounds: failed thread {thread.thread_index} "
                    "must hold fewer than max_rounds completed rounds"
                )
        elif not 1 <= len(thread.rounds) <= cfg.max_rounds:
            raise ValidationError(
                f"ThreadRecord.rounds must have 1..{cfg.max_rounds} rounds "
                f"(thread {thread.thread_index} has {len(thread.rounds)})"
            )
        for i, rnd in enumerate(thread.rounds, start=1):
            if len(rnd.verdicts) != cfg.verdicts_per_round:
                raise ValidationError(
                    f"RoundRecord.verdicts must have exactly {cfg.verdicts_per_round} entries "
                    f"(thread {thread.thread_index}, round {i})"
                )
            if rnd.candidate.thread_index != thread.thread_index or rnd.candidate.round_index != i:
                raise ValidationError(
                    f"Candidate indices must match their position "
                    f"(thread {thread.thread_index}, round {i})"
                )
            if rnd.candidate.problem_id != run.problem_id:
                raise ValidationError("Candidate.problem_id must match RunRecord.problem_id")
            unanimous = rnd.score == cfg.verdicts_per_round
            is_last = i == len(thread.rounds)
            if unanimous and not is_last:
                raise ValidationError(
                    f"ThreadRecord.rounds: unanimous score only allowed at the final round "
                    f"(thread {thread.thread_index}, round {i})"
                )
            if cfg.judge_attached and rnd.exec_result is None:
                raise ValidationError(
                    f"RoundRecord.exec_result required when judge_attached "
                    f"(thread {thread.thread_index}, round {i})"
                )
        if not failed:
            last_unanimous = thread.rounds[-1].score == cfg.verdicts_per_round
            if (thread.termination is Termination.UNANIMOUS_EARLY_STOP) != last_unanimous:
                raise ValidationError(
                    f"ThreadRecord.termination is unanimous_early_stop iff the last round "
                    f"scored {cfg.verdicts_per_round} (thread {thread.thread_index})"
                )
            if thread.termination is Termination.MAX_ROUNDS_REACHED and len(thread.rounds) != cfg.max_rounds:
                raise ValidationError(
                    f"ThreadRecord.termination max_rounds_reached requires exactly "
                    f"{cfg.max_rounds} rounds (thread {thread.thread_index})"
                )

    sel = run.selected
    target = next((t for t in run.threads if t.thread_index == sel.thread_index), None)
    if target is None or not 1 <= sel.round_index <= len(target.rounds):
        raise ValidationError(
            f"RunRecord.selected points at a nonexistent round "
            f"(thread {sel.thread_index}, round {sel.round_index})"
        )
    if target.termination is Termination.FAILED:
        raise ValidationError("RunRecord.selected must not point into a failed thread")

    expected_tokens = recompute_total_tokens(run.threads)
    if run.total_tokens != expected_tokens:
        raise ValidationError(
            f"RunRecord.total_tokens is {run.total_tokens}, recomputed sum is {expected_tokens}"
        )
