#!/usr/bin/env python3
"""Judge the bundled toy problems with three characteristic solutions.

The bundled set covers the three failure archetypes: a clean accept, a wrong
answer from an off-by-one, and a time-limit kill on a tight budget. A fourth
case shows the truncation rule: a cut-off candidate scores zero without even
being compiled.
"""

from pathlib import Path

from verifine import Candidate, ExecutionJudge, Role, load_problem

REPO = Path(__file__).resolve().parent.parent


def candidate(source: str, truncated: bool = False) -> Candidate:
    return Candidate(
        problem_id="demo", thread_index=0, round_index=1, role=Role.GENERATION,
        explanation="", source_code=source, token_count=len(source) // 4, truncated=truncated,
    )


judge = ExecutionJudge()

cases = [
    (
        "aplusb",
        "correct sum",
        '#include <iostream>\nint main() { long long a, b; std::cin >> a >> b; std::cout << a + b << "\\n"; }',
    ),
    (
        "sumton",
        "off-by-one (drops the last term)",
        "#include <iostream>\nint main() { long long n, s = 0; std::cin >> n; "
        'for (long long i = 1; i < n; ++i) s += i; std::cout << s << "\\n"; }',
    ),
    (
        "echofast",
        "busy loop under a 100 ms limit",
        "#include <iostream>\nint main() { long long n; std::cin >> n; "
        "volatile unsigned long long x = 0; while (true) ++x; std::cout << n; }",
    ),
]

for problem_name, description, source in cases:
    problem = load_problem(REPO / "problems" / problem_name)
    report = judge.judge_solution(problem, candidate(source))
    timings = ", ".join(f"{status.value}:{ms}ms" for status, ms in report.per_test)
    print(f"{problem_name} [{description}]")
    print(f"  -> {report.status.value}, score {report.binary_score}, "
          f"passed {report.passed}/{report.total}  ({timings})")

problem = load_problem(REPO / "problems" / "aplusb")
report = judge.judge_solution(problem, candidate("int main() { // cut off mid-", truncated=True))
print("aplusb [truncated candidate]")
print(f"  -> {report.status.value}, score {report.binary_score} (never compiled)")
