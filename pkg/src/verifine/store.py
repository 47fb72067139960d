"""Canonical serialization and file-backed stores.

Run store: one RunRecord per line (UTF-8 JSON), append-only. Problem
directories: ``problem.json`` next to a ``tests/`` directory of ``NN.in`` /
``NN.out`` pairs whose lexicographic order defines the test order.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterator

from .domain import (
    SCHEMA_VERSION,
    Candidate,
    CompareMode,
    ExecReport,
    ExecStatus,
    ParseStatus,
    PipelineConfig,
    Problem,
    Role,
    RoundRecord,
    RunRecord,
    Selection,
    Termination,
    TestCase,
    ThreadRecord,
    ValidationError,
    Verdict,
    validate_run,
)


def _candidate_dict(c: Candidate) -> dict[str, Any]:
    return {
        "problem_id": c.problem_id,
        "thread_index": c.thread_index,
        "round_index": c.round_index,
        "role": c.role.value,
        "explanation": c.explanation,
        "source_code": c.source_code,
        "token_count": c.token_count,
        "truncated": c.truncated,
    }


def _verdict_dict(v) -> dict[str, Any]:
    return {
        "judgment": v.judgment,
        "reasoning": v.reasoning,
        "token_count": v.token_count,
        "parse_status": v.parse_status.value,
    }


def _exec_dict(e: ExecReport) -> dict[str, Any]:
    return {
        "status": e.status.value,
        "passed": e.passed,
        "total": e.total,
        "binary_score": e.binary_score,
        "per_test": [[s.value, ms] for s, ms in e.per_test],
        "diagnostics": e.diagnostics,
    }


def _config_dict(cfg: PipelineConfig) -> dict[str, Any]:
    return {
        "threads": cfg.threads,
        "max_rounds": cfg.max_rounds,
        "verdicts_per_round": cfg.verdicts_per_round,
        "max_generation_tokens": cfg.max_generation_tokens,
        "max_verification_tokens": cfg.max_verification_tokens,
        "concurrency_cap": cfg.concurrency_cap,
        "rng_seed": cfg.rng_seed,
        "backend_id": cfg.backend_id,
        "judge_attached": cfg.judge_attached,
        "temperature": cfg.temperature,
    }


def run_to_dict(run: RunRecord) -> dict[str, Any]:
    """RunRecord as a JSON-ready dict with stable field ordering."""
    return {
        "schema_version": run.schema_version,
        "problem_id": run.problem_id,
        "config": _config_dict(run.config),
        "rng_seed": run.rng_seed,
        "threads": [
            {
                "thread_index": t.thread_index,
                "termination": t.termination.value,
                "failure": t.failure,
                "rounds": [
                    {
                        "candidate": _candidate_dict(r.candidate),
                        "verdicts": [_verdict_dict(v) for v in r.verdicts],
                        "score": r.score,
                        "exec_result": _exec_dict(r.exec_result) if r.exec_result else None,
                    }
                    for r in t.rounds
                ],
            }
            for t in run.threads
        ],
        "selected": {"thread_index": run.selected.thread_index, "round_index": run.selected.round_index},
        "total_tokens": run.total_tokens,
    }


def serialize_run(run: RunRecord) -> bytes:
    """One newline-terminated UTF-8 JSON document; validates all invariants."""
    validate_run(run)
    text = json.dumps(run_to_dict(run), ensure_ascii=False, separators=(",", ":"))
    return (text + "\n").encode("utf-8")


def _exec_from_dict(d: dict[str, Any]) -> ExecReport:
    return ExecReport(
        status=ExecStatus(d["status"]),
        passed=d["passed"],
        total=d["total"],
        binary_score=d["binary_score"],
        per_test=tuple((ExecStatus(s), ms) for s, ms in d.get("per_test", [])),
        diagnostics=d.get("diagnostics", ""),
    )


def run_from_dict(doc: dict[str, Any]) -> RunRecord:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(f"schema_version {version!r} is not the supported {SCHEMA_VERSION}")
    cfgd = doc["config"]
    config = PipelineConfig(
        threads=cfgd["threads"],
        max_rounds=cfgd["max_rounds"],
        verdicts_per_round=cfgd["verdicts_per_round"],
        max_generation_tokens=cfgd["max_generation_tokens"],
        concurrency_cap=cfgd["concurrency_cap"],
        rng_seed=cfgd["rng_seed"],
        backend_id=cfgd["backend_id"],
        judge_attached=cfgd["judge_attached"],
        max_verification_tokens=cfgd.get("max_verification_tokens"),
        temperature=cfgd.get("temperature", 1.0),
    )
    threads = tuple(
        ThreadRecord(
            thread_index=td["thread_index"],
            termination=Termination(td["termination"]),
            failure=td.get("failure"),
            rounds=tuple(
                RoundRecord(
                    candidate=Candidate(
                        problem_id=rd["candidate"]["problem_id"],
                        thread_index=rd["candidate"]["thread_index"],
                        round_index=rd["candidate"]["round_index"],
                        role=Role(rd["candidate"]["role"]),
                        explanation=rd["candidate"]["explanation"],
                        source_code=rd["candidate"]["source_code"],
                        token_count=rd["candidate"]["token_count"],
                        truncated=rd["candidate"]["truncated"],
                    ),
                    verdicts=tuple(
                        Verdict(
                            judgment=vd["judgment"],
                            reasoning=vd["reasoning"],
                            token_count=vd["token_count"],
                            parse_status=ParseStatus(vd["parse_status"]),
                        )
                        for vd in rd["verdicts"]
                    ),
                    score=rd["score"],
                    exec_result=_exec_from_dict(rd["exec_result"]) if rd.get("exec_result") else None,
                )
                for rd in td["rounds"]
            ),
        )
        for td in doc["threads"]
    )
    run = RunRecord(
        problem_id=doc["problem_id"],
        config=config,
        threads=threads,
        selected=Selection(doc["selected"]["thread_index"], doc["selected"]["round_index"]),
        total_tokens=doc["total_tokens"],
        rng_seed=doc["rng_seed"],
        schema_version=version,
    )
    validate_run(run)
    return run


def deserialize_run(line: bytes | str) -> RunRecord:
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    return run_from_dict(json.loads(line))


class RunStore:
    """Append-only line store of RunRecords."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, run: RunRecord) -> None:
        data = serialize_run(run)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "ab") as fh:
            fh.write(data)

    def __iter__(self) -> Iterator[RunRecord]:
        if not self.path.exists():
            return
        with open(self.path, "rb") as fh:
            for line in fh:
                if line.strip():
                    yield deserialize_run(line)

    def read_all(self) -> list[RunRecord]:
        return list(self)


def load_problem(directory: str | Path) -> Problem:
    """Load a problem directory: problem.json + tests/NN.in, tests/NN.out."""
    directory = Path(directory)
    meta_path = directory / "problem.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no problem.json in {directory}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))

    tests_dir = directory / "tests"
    cases = []
    for in_path in sorted(tests_dir.glob("*.in")):
        out_path = in_path.with_suffix(".out")
        if not out_path.exists():
            raise FileNotFoundError(f"missing expected-output file {out_path}")
        cases.append(TestCase(input=in_path.read_bytes(), expected_output=out_path.read_bytes()))

    return Problem(
        id=meta.get("id", directory.name),
        statement=meta["statement"],
        tests=tuple(cases),
        time_limit_ms=meta["time_limit_ms"],
        memory_limit_mib=meta["memory_limit_mib"],
        compare_mode=CompareMode(meta.get("compare_mode", "exact")),
    )


def save_problem(problem: Problem, directory: str | Path) -> None:
    """Write a problem directory in the canonical layout (used by fixtures)."""
    directory = Path(directory)
    (directory / "tests").mkdir(parents=True, exist_ok=True)
    meta = {
        "id": problem.id,
        "statement": problem.statement,
        "time_limit_ms": problem.time_limit_ms,
        "memory_limit_mib": problem.memory_limit_mib,
        "compare_mode": problem.compare_mode.value,
    }
    (directory / "problem.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    for i, case in enumerate(problem.tests):
        (directory / "tests" / f"{i:02d}.in").write_bytes(case.input)
        (directory / "tests" / f"{i:02d}.out").write_bytes(case.expected_output)


def load_problems(directory: str | Path) -> list[Problem]:
    """Load every problem subdirectory under ``directory``, sorted by name."""
    root = Path(directory)
    problems = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if (sub / "problem.json").exists():
            problems.append(load_problem(sub))
    if not problems:
        raise FileNotFoundError(f"no problem directories under {root}")
    return problems
