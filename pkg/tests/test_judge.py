"""Execution judge: compilation, sandboxed runs, binary scoring."""

from __future__ import annotations

import pytest

from verifine import (
    Candidate,
    CompareMode,
    CompiledArtifact,
    CompileFailure,
    ExecStatus,
    ExecutionJudge,
    JudgeEnvironmentError,
    Problem,
    Role,
    TestCase,
    ToolchainProfile,
    extract_source,
)
from verifine.judge import outputs_match

APLUSB_CPP = """#include <iostream>
int main() { long long a, b; std::cin >> a >> b; std::cout << a + b << "\\n"; return 0; }
"""


def _candidate(source: str, truncated: bool = False) -> Candidate:
    return Candidate(
        problem_id="p",
        thread_index=0,
        round_index=1,
        role=Role.GENERATION,
        explanation="",
        source_code=source,
        token_count=10,
        truncated=truncated,
    )


def _problem(tests, time_ms=2000, compare=CompareMode.EXACT, mem_mib=256) -> Problem:
    return Problem(
        id="p",
        statement="s",
        tests=tuple(TestCase(*t) for t in tests),
        time_limit_ms=time_ms,
        memory_limit_mib=mem_mib,
        compare_mode=compare,
    )


class TestExtractSource:
    def test_no_fence_means_whole_text(self):
        assert extract_source("int main() {}") == ("", "int main() {}")

    def test_single_fence(self):
        explanation, source = extract_source("Use a loop.\n```cpp\nint main() {}\n```")
        assert explanation == "Use a loop."
        assert source == "int main() {}\n"

    def test_last_fence_wins(self):
        text = "first try\n```\nold()\n```\nactually:\n```cpp\nnew()\n```"
        explanation, source = extract_source(text)
        assert source == "new()\n"
        assert explanation.endswith("actually:")


class TestCompile:
    def test_hello_world_compiles(self, tmp_path):
        judge = ExecutionJudge(scratch_root=tmp_path)
        artifact = judge.compile('#include <cstdio>\nint main() { puts("hi"); }', "cpp")
        assert isinstance(artifact, CompiledArtifact)

    def test_syntax_error_reports_diagnostics(self, tmp_path):
        judge = ExecutionJudge(scratch_root=tmp_path)
        failure = judge.compile("int main( {", "cpp")
        assert isinstance(failure, CompileFailure)
        assert failure.diagnostics

    def test_empty_source_fails(self, tmp_path):
        judge = ExecutionJudge(scratch_root=tmp_path)
        assert isinstance(judge.compile("", "cpp"), CompileFailure)

    def test_missing_compiler_is_an_environment_error(self, tmp_path):
        toolchains = {
            "ghost": ToolchainProfile(
                name="ghost",
                compile_cmd="definitely-not-a-compiler-7f3a {src} {bin}",
                run_cmd="{bin}",
                source_suffix=".x",
            )
        }
        judge = ExecutionJudge(toolchains=toolchains, default_toolchain="ghost", scratch_root=tmp_path)
        with pytest.raises(JudgeEnvironmentError):
            judge.compile("x", "ghost")

    def test_unknown_toolchain_is_an_environment_error(self, tmp_path):
        judge = ExecutionJudge(scratch_root=tmp_path)
        with pytest.raises(JudgeEnvironmentError):
            judge.compile("x", "cobol")


class TestRunTest:
    @pytest.fixture
    def judge(self, tmp_path):
        return ExecutionJudge(scratch_root=tmp_path)

    def _py(self, judge, source):
        artifact = judge.compile(source, "python")
        assert isinstance(artifact, CompiledArtifact)
        return artifact

    def test_echo_program_accepted(self, judge):
        artifact = self._py(judge, "print(input())")
        status, out, wall = judge.run_test(artifact, TestCase(b"42\n", b"42\n"), 2000, 256)
        assert status is ExecStatus.ACCEPTED
        assert out == b"42\n"
        assert wall >= 0

    def test_busy_loop_hits_time_limit(self, judge):
        artifact = self._py(judge, "while True: pass")
        status, _, wall = judge.run_test(artifact, TestCase(b"", b""), 100, 256)
        assert status is ExecStatus.TIME_LIMIT
        assert wall >= 100  # killed no earlier than the limit itself

    def test_nonzero_exit_is_runtime_error(self, judge):
        artifact = self._py(judge, "import sys; sys.exit(3)")
        status, _, _ = judge.run_test(artifact, TestCase(b"", b""), 2000, 256)
        assert status is ExecStatus.RUNTIME_ERROR

    def test_wrong_output(self, judge):
        artifact = self._py(judge, "print('nope')")
        status, _, _ = judge.run_test(artifact, TestCase(b"", b"yes\n"), 2000, 256)
        assert status is ExecStatus.WRONG_ANSWER

    def test_memory_cap_turns_allocation_into_runtime_error(self, tmp_path):
        judge = ExecutionJudge(scratch_root=tmp_path)
        # reads the buffer back so -O2 cannot elide the allocation
        source = """#include <cstdio>
#include <cstdlib>
#include <cstring>
int main() {
    size_t n = 512u << 20;
    char* p = (char*)malloc(n);
    if (!p) return 7;
    memset(p, 1, n);
    long long sum = 0;
    for (size_t i = 0; i < n; i += 4096) sum += p[i];
    printf("%lld\\n", sum);
    free(p);
    return 0;
}
"""
        artifact = judge.compile(source, "cpp")
        assert isinstance(artifact, CompiledArtifact)
        status, _, _ = judge.run_test(artifact, TestCase(b"", b"131072\n"), 5000, 128)
        assert status is ExecStatus.RUNTIME_ERROR
        status, _, _ = judge.run_test(artifact, TestCase(b"", b"131072\n"), 5000, 2048)
        assert status is ExecStatus.ACCEPTED


class TestOutputComparison:
    def test_exact_compares_bytes(self):
        assert outputs_match(b"1 2\n", b"1 2\n", CompareMode.EXACT)
        assert not outputs_match(b"1 2", b"1 2\n", CompareMode.EXACT)

    def test_token_normalized_ignores_whitespace_shape(self):
        assert outputs_match(b"1 2", b"1 2\n", CompareMode.TOKEN_NORMALIZED)
        assert outputs_match(b"1\n2\n", b"1 2", CompareMode.TOKEN_NORMALIZED)
        assert outputs_match(b"  1   2  \n\n", b"1 2", CompareMode.TOKEN_NORMALIZED)
        assert not outputs_match(b"12", b"1 2", CompareMode.TOKEN_NORMALIZED)


class TestJudgeSolution:
    def test_correct_solution_passes_all_tests(self, tmp_path):
        judge = ExecutionJudge(scratch_root=tmp_path)
        problem = _problem([(b"1 2\n", b"3\n"), (b"5 7\n", b"12\n"), (b"0 0\n", b"0\n")])
        report = judge.judge_solution(problem, _candidate(APLUSB_CPP))
        assert report.status is ExecStatus.ACCEPTED
        assert report.binary_score == 1
        assert report.passed == report.total == 3

    def test_partial_pass_scores_zero_and_stops_early(self, tmp_path):
        judge = ExecutionJudge(scratch_root=tmp_path)
        problem = _problem([(b"1\n", b"1\n"), (b"2\n", b"2\n"), (b"3\n", b"0\n")])
        source = "print(input())"
        report = judge.judge_solution(problem, _candidate(source), toolchain_profile="python")
        assert report.binary_score == 0
        assert report.status is ExecStatus.WRONG_ANSWER
        assert report.passed == 2
        assert len(report.per_test) == 3  # only executed tests recorded

    def test_truncated_candidate_skips_compilation(self, tmp_path):
        # broken toolchain proves compile is never attempted
        toolchains = {
            "ghost": ToolchainProfile(name="ghost", compile_cmd="missing-compiler {src}", run_cmd="{bin}")
        }
        judge = ExecutionJudge(toolchains=toolchains, default_toolchain="ghost", scratch_root=tmp_path)
        problem = _problem([(b"", b"")])
        report = judge.judge_solution(problem, _candidate("whatever", truncated=True))
        assert report.status is ExecStatus.TRUNCATED_INPUT
        assert report.binary_score == 0

    def test_compile_error_report(self, tmp_path):
        judge = ExecutionJudge(scratch_root=tmp_path)
        problem = _problem([(b"", b"")])
        report = judge.judge_solution(problem, _candidate("int main( {"))
        assert report.status is ExecStatus.COMPILE_ERROR
        assert report.binary_score == 0
        assert report.diagnostics

    def test_environment_errors_propagate_instead_of_scoring_zero(self, tmp_path):
        toolchains = {
            "ghost": ToolchainProfile(name="ghost", compile_cmd="missing-compiler {src}", run_cmd="{bin}")
        }
        judge = ExecutionJudge(toolchains=toolchains, default_toolchain="ghost", scratch_root=tmp_path)
        with pytest.raises(JudgeEnvironmentError):
            judge.judge_solution(_problem([(b"", b"")]), _candidate("anything"))

    def test_deterministic_up_to_wall_time(self, tmp_path):
        judge = ExecutionJudge(scratch_root=tmp_path)
        problem = _problem([(b"1\n", b"1\n"), (b"9\n", b"9\n")])
        candidate = _candidate("print(input())")
        first = judge.judge_solution(problem, candidate, toolchain_profile="python")
        second = judge.judge_solution(problem, candidate, toolchain_profile="python")
        strip = lambda r: (r.status, r.passed, r.total, r.binary_score, [s for s, _ in r.per_test])
        assert strip(first) == strip(second)

    def test_token_normalized_mode_forgives_trailing_newline(self, tmp_path):
        judge = ExecutionJudge(scratch_root=tmp_path)
        problem = _problem([(b"7\n", b"7")], compare=CompareMode.TOKEN_NORMALIZED)
        report = judge.judge_solution(problem, _candidate("print(input())"), toolchain_profile="python")
        assert report.binary_score == 1
