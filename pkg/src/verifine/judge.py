"""Compile and execute candidate programs against a problem's test suite.

The sandbox is a subprocess with an isolated scratch directory, a wall-clock
timeout, and an OS-level address-space cap where the platform supports it.
That is deliberate: full container isolation is out of scope, so run this
only on trusted or disposable hosts.
"""

from __future__ import annotations

import re
import shlex
import shutil
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

try:
    import resource
except ImportError:  # non-POSIX: memory caps degrade to best-effort
    resource = None

from .domain import (
    Candidate,
    CompareMode,
    ExecReport,
    ExecStatus,
    Problem,
    TestCase,
)

_FENCED_BLOCK = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)

COMPILE_TIMEOUT_S = 60.0


class JudgeEnvironmentError(RuntimeError):
    """The judging environment itself is broken (missing compiler, bad sandbox).

    Deliberately distinct from a candidate's compile failure: environment
    errors propagate instead of silently becoming a zero score.
    """


def extract_source(completion: str) -> tuple[str, str]:
    """Split a raw completion into (explanation, source code).

    The source is the last fenced code block; the explanation is the text
    before it. Completions without a fence are treated as pure source.
    """
    matches = list(_FENCED_BLOCK.finditer(completion))
    if not matches:
        return "", completion
    last = matches[-1]
    return completion[: last.start()].strip(), last.group(1)


@dataclass(frozen=True)
class ToolchainProfile:
    """Command templates for one language; {src}, {bin}, {input} placeholders.

    ``compile_cmd`` may be None for interpreted languages, in which case the
    source file itself is the runnable artifact.
    """

    name: str
    run_cmd: str
    compile_cmd: str | None = None
    source_suffix: str = ".txt"


CPP_PROFILE = ToolchainProfile(
    name="cpp",
    compile_cmd="g++ -O2 -std=gnu++17 -pipe -o {bin} {src}",
    run_cmd="{bin}",
    source_suffix=".cpp",
)

PYTHON_PROFILE = ToolchainProfile(
    name="python",
    run_cmd="python3 {src}",
    source_suffix=".py",
)

DEFAULT_TOOLCHAINS = {"cpp": CPP_PROFILE, "python": PYTHON_PROFILE}


@dataclass(frozen=True)
class CompiledArtifact:
    run_path: str
    scratch_dir: str
    profile: ToolchainProfile


@dataclass(frozen=True)
class CompileFailure:
    diagnostics: str


def _substitute(template: str, **values: str) -> list[str]:
    # Split first, substitute per token: paths with spaces stay single args.
    tokens = shlex.split(template)
    out = []
    for token in tokens:
        for key, value in values.items():
            token = token.replace("{" + key + "}", value)
        out.append(token)
    return out


def _rlimit_preexec(memory_mib: int):
    if resource is None:
        return None

    def apply() -> None:
        limit = memory_mib << 20
        try:
            resource.setrlimit(resource.RLIMIT_AS, (limit, limit))
        except (ValueError, OSError):
            pass  # best-effort; documented trust model

    return apply


def outputs_match(actual: bytes, expected: bytes, mode: CompareMode) -> bool:
    if mode is CompareMode.EXACT:
        return actual == expected
    return actual.split() == expected.split()


class ExecutionJudge:
    """Judges candidates by compiling and running them under resource limits."""

    def __init__(
        self,
        toolchains: dict[str, ToolchainProfile] | None = None,
        default_toolchain: str = "cpp",
        max_parallel: int = 2,
        time_slack_ms: int = 100,
        scratch_root: str | Path | None = None,
    ):
        self.toolchains = dict(toolchains or DEFAULT_TOOLCHAINS)
        if default_toolchain not in self.toolchains:
            raise JudgeEnvironmentError(f"default toolchain {default_toolchain!r} is not configured")
        self.default_toolchain = default_toolchain
        # Kill slack must leave the program the full limit before termination.
        self.time_slack_ms = max(50, time_slack_ms)
        self.scratch_root = Path(scratch_root) if scratch_root else None
        self._slots = threading.BoundedSemaphore(max_parallel)

    def compile(self, source_code: str, toolchain_profile: str | None = None) -> CompiledArtifact | CompileFailure:
        profile = self.toolchains.get(toolchain_profile or self.default_toolchain)
        if profile is None:
            raise JudgeEnvironmentError(f"toolchain {toolchain_profile!r} is not configured")
        scratch = tempfile.mkdtemp(prefix="vf-judge-", dir=self.scratch_root)
        src = Path(scratch) / f"main{profile.source_suffix}"
        src.write_text(source_code, encoding="utf-8")
        if profile.compile_cmd is None:
            return CompiledArtifact(run_path=str(src), scratch_dir=scratch, profile=profile)
        bin_path = Path(scratch) / "main.bin"
        cmd = _substitute(profile.compile_cmd, src=str(src), bin=str(bin_path))
        try:
            proc = subprocess.run(
                cmd,
                capture_output=True,
                timeout=COMPILE_TIMEOUT_S,
                cwd=scratch,
            )
        except FileNotFoundError as exc:
            raise JudgeEnvironmentError(f"compiler not found: {cmd[0]}") from exc
        except subprocess.TimeoutExpired:
            return CompileFailure(diagnostics=f"compilation timed out after {COMPILE_TIMEOUT_S}s")
        if proc.returncode != 0:
            diag = proc.stderr.decode("utf-8", errors="replace") or "compiler exited nonzero"
            return CompileFailure(diagnostics=diag[:4000])
        return CompiledArtifact(run_path=str(bin_path), scratch_dir=scratch, profile=profile)

    def run_test(
        self,
        artifact: CompiledArtifact,
        test: TestCase,
        time_limit_ms: int,
        memory_limit_mib: int,
        compare_mode: CompareMode = CompareMode.EXACT,
    ) -> tuple[ExecStatus, bytes, int]:
        """Run one test; returns (status, raw output bytes, wall time ms)."""
        input_path = Path(artifact.scratch_dir) / "current.in"
        input_path.write_bytes(test.input)
        cmd = _substitute(
            artifact.profile.run_cmd,
            src=artifact.run_path,
            bin=artifact.run_path,
            input=str(input_path),
        )
        kill_after_s = (time_limit_ms + self.time_slack_ms) / 1000.0
        start = time.perf_counter()
        try:
            proc = subprocess.run(
                cmd,
                input=test.input,
                capture_output=True,
                timeout=kill_after_s,
                cwd=artifact.scratch_dir,
                preexec_fn=_rlimit_preexec(memory_limit_mib),
            )
        except FileNotFoundError as exc:
            raise JudgeEnvironmentError(f"runner not found: {cmd[0]}") from exc
        except subprocess.TimeoutExpired:
            wall_ms = int((time.perf_counter() - start) * 1000)
            return ExecStatus.TIME_LIMIT, b"", wall_ms
        wall_ms = int((time.perf_counter() - start) * 1000)
        if wall_ms > time_limit_ms:
            return ExecStatus.TIME_LIMIT, proc.stdout, wall_ms
        if proc.returncode != 0:
            return ExecStatus.RUNTIME_ERROR, proc.stdout, wall_ms
        if outputs_match(proc.stdout, test.expected_output, compare_mode):
            return ExecStatus.ACCEPTED, proc.stdout, wall_ms
        return ExecStatus.WRONG_ANSWER, proc.stdout, wall_ms

    def judge_solution(
        self, problem: Problem, candidate: Candidate, toolchain_profile: str | None = None
    ) -> ExecReport:
        """Binary-reward judgment: 1 only if every test is accepted.

        Truncated candidates score 0 outright, without compilation. Execution
        stops at the first failing test; per_test covers only executed tests.
        """
        total = len(problem.tests)
        if candidate.truncated:
            return ExecReport(
                status=ExecStatus.TRUNCATED_INPUT, passed=0, total=total, binary_score=0
            )
        with self._slots:
            compiled = self.compile(candidate.source_code, toolchain_profile)
            if isinstance(compiled, CompileFailure):
                return ExecReport(
                    status=ExecStatus.COMPILE_ERROR,
                    passed=0,
                    total=total,
                    binary_score=0,
                    diagnostics=compiled.diagnostics,
                )
            try:
                per_test: list[tuple[ExecStatus, int]] = []
                passed = 0
                for test in problem.tests:
                    status, _, wall_ms = self.run_test(
                        compiled,
                        test,
                        problem.time_limit_ms,
                        problem.memory_limit_mib,
                        problem.compare_mode,
                    )
                    per_test.append((status, wall_ms))
                    if status is not ExecStatus.ACCEPTED:
                        return ExecReport(
                            status=status,
                            passed=passed,
                            total=total,
                            binary_score=0,
                            per_test=tuple(per_test),
                        )
                    passed += 1
                return ExecReport(
                    status=ExecStatus.ACCEPTED,
                    passed=passed,
                    total=total,
                    binary_score=1,
                    per_test=tuple(per_test),
                )
            finally:
                shutil.rmtree(compiled.scratch_dir, ignore_errors=True)
