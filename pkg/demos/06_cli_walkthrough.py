#!/usr/bin/env python3
"""Drive the command line end to end inside a temp directory.

Covers the four subcommands: `run` over a problem directory (twice, to show
resume), `sweep` over a thread grid with its scaling CSV, `analyze` reports,
and ad-hoc `reward` evaluation. The same flows work from a shell; this script
just calls the entry point directly so the walkthrough is reproducible.
"""

import json
import tempfile
from pathlib import Path

from verifine import Problem, TestCase, save_problem
from verifine.cli import main

workdir = Path(tempfile.mkdtemp(prefix="verifine-demo-"))
print(f"working in {workdir}\n")

problems = workdir / "problems"
for name in ("alpha", "beta"):
    save_problem(
        Problem(id=name, statement=f"Problem {name}.", tests=(TestCase(b"", b""),),
                time_limit_ms=1000, memory_limit_mib=64),
        problems / name,
    )

config_path = workdir / "config.json"
config_path.write_text(json.dumps({
    "pipeline": {
        "threads": 4, "max_rounds": 3, "verdicts_per_round": 2,
        "max_generation_tokens": 100000, "concurrency_cap": 4,
        "rng_seed": 99, "judge_attached": True,
    },
    "backend": {
        "kind": "simulator",
        "simulator": {
            "p_first_correct": 0.3, "verifier_tpr": 0.9, "verifier_tnr": 0.7,
            "p_refine_fix": 0.35, "p_refine_break": 0.05,
        },
    },
    "sweep": {"threads": [1, 2, 4], "max_rounds": [1], "verdicts_per_round": [2],
              "runs_per_point": 60},
}, indent=2))

store = workdir / "runs.jsonl"
print("== run ==")
main(["run", "--config", str(config_path), "--problems", str(problems), "--store", str(store)])
print(f"store now has {sum(1 for _ in open(store))} lines")

print("\n== run again (resume skips everything) ==")
main(["run", "--config", str(config_path), "--problems", str(problems), "--store", str(store)])
print(f"store still has {sum(1 for _ in open(store))} lines")

print("\n== analyze: selection / verification ==")
main(["analyze", "--store", str(store), "--kind", "selection", "--out", str(workdir / "selection.json")])
main(["analyze", "--store", str(store), "--kind", "verification", "--out", str(workdir / "verification.json")])

print("\n== sweep over a thread grid ==")
sweep_store = workdir / "sweep.jsonl"
main(["sweep", "--config", str(config_path), "--store", str(sweep_store), "--csv", str(workdir / "scaling.csv")])
print((workdir / "scaling.csv").read_text())

print("== ad-hoc reward evaluation ==")
main(["reward", "--score", "1", "--length", "75000", "--dist", "uniform:60000:90000"])
main(["reward", "--score", "1", "--length", "75000", "--dist", "gaussian:75000:5000"])
