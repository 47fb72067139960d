"""Operator command line: run pipelines, sweep grids, analyze stores.

Subcommands:
    run      execute the configured pipeline over a problem directory
    sweep    run a Cartesian grid over threads/rounds/verdicts, emit scaling CSV
    analyze  produce selection / passk / fit / verification reports from a store
    reward   evaluate the length-capped reward shaping for one (score, length)

Exit codes: 0 success, 1 pipeline or analysis failure, 2 config error.
Progress events stream to stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

from .analytics import (
    AnalysisError,
    loglinear_fit,
    pass_at_k,
    selection_accuracy_report,
    verification_metrics,
    write_scaling_csv,
)
from .backends import ReplayBackend, derive_seed
from .config import (
    ConfigError,
    build_backend,
    build_judge,
    config_group_hash,
    config_hash,
    load_config,
    pipeline_config,
)
from .domain import ClipDistribution, Problem, ScalingPoint, TestCase, ValidationError
from .orchestrator import PipelineError, run_pipeline
from .rewards import rc_reward, rc_reward_mc
from .store import RunStore, load_problems


def _log_event(event: dict) -> None:
    print(json.dumps(event, ensure_ascii=False), file=sys.stderr, flush=True)


def _existing_keys(store: RunStore) -> set[tuple[str, str]]:
    return {(run.problem_id, config_hash(run.config)) for run in store}


def parse_dist_spec(spec: str) -> ClipDistribution:
    parts = spec.split(":")
    name, params = parts[0], parts[1:]
    try:
        values = [float(p) for p in params]
        if name == "hard":
            return ClipDistribution.hard(*values)
        if name == "uniform":
            return ClipDistribution.uniform(*values)
        if name == "gaussian":
            return ClipDistribution.gaussian(*values)
        if name == "truncexp":
            return ClipDistribution.truncexp(*values)
    except (TypeError, ValueError, ValidationError) as exc:
        raise ConfigError(f"bad --dist spec {spec!r}: {exc}") from exc
    raise ConfigError(f"bad --dist spec {spec!r}: unknown variant {name!r}")


def _replay_runs(cfg: dict) -> dict[str, object]:
    replay_path = cfg.get("backend", {}).get("replay_store")
    if not replay_path:
        raise ConfigError("missing required config key backend.replay_store")
    runs = {}
    for run in RunStore(replay_path):
        runs[run.problem_id] = run
    return runs


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    problems = load_problems(args.problems)
    store = RunStore(args.store)
    existing = _existing_keys(store)
    kind = cfg.get("backend", {}).get("kind")
    replay_runs = _replay_runs(cfg) if kind == "replay" else None
    backend = build_backend(cfg) if kind != "replay" else None
    judge = build_judge(cfg)
    base_seed = cfg.get("pipeline", {}).get("rng_seed")
    if base_seed is None:
        raise ConfigError("missing required config key pipeline.rng_seed")

    failures = 0
    for problem in problems:
        if replay_runs is not None:
            logged = replay_runs.get(problem.id)
            if logged is None:
                _log_event({"event": "skipped", "problem_id": problem.id, "reason": "not in replay store"})
                continue
            problem_backend = ReplayBackend(logged)
            pconfig = logged.config
        else:
            problem_backend = backend
            pconfig = pipeline_config(cfg, rng_seed=derive_seed(base_seed, problem.id))
        if (problem.id, config_hash(pconfig)) in existing:
            _log_event({"event": "skipped", "problem_id": problem.id, "reason": "already in store"})
            continue
        try:
            run = run_pipeline(problem, pconfig, problem_backend, judge, on_event=_log_event)
        except PipelineError as exc:
            _log_event({"event": "pipeline_error", "problem_id": problem.id, "error": str(exc)})
            failures += 1
            continue
        store.append(run)
    return 1 if failures else 0


def _synthetic_problems(count: int) -> list[Problem]:
    return [
        Problem(
            id=f"sim-{i:03d}",
            statement="Synthetic placeholder problem for simulator sweeps.",
            tests=(TestCase(input=b"", expected_output=b""),),
            time_limit_ms=1000,
            memory_limit_mib=256,
        )
        for i in range(count)
    ]


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    sweep = json.loads(Path(args.sweep).read_text(encoding="utf-8")) if args.sweep else cfg.get("sweep")
    if not sweep:
        raise ConfigError("missing required config section sweep")
    axes = []
    for key in ("threads", "max_rounds", "verdicts_per_round"):
        values = sweep.get(key)
        if not values:
            raise ConfigError(f"missing or empty sweep axis sweep.{key}")
        axes.append([int(v) for v in values])
    if not cfg.get("pipeline", {}).get("judge_attached", False):
        raise ConfigError("sweep needs pipeline.judge_attached so accuracy can be scored")

    problems_dir = cfg.get("problems", {}).get("dir")
    if problems_dir:
        problems = load_problems(problems_dir)
    else:
        problems = _synthetic_problems(int(sweep.get("runs_per_point", 50)))

    backend = build_backend(cfg)
    judge = build_judge(cfg)
    store = RunStore(args.store)
    existing = _existing_keys(store)
    base_seed = cfg.get("pipeline", {}).get("rng_seed")
    if base_seed is None:
        raise ConfigError("missing required config key pipeline.rng_seed")

    points: dict[str, tuple[int, int, int]] = {}  # seed-independent hash -> axes
    failures = 0
    for n, m, v in itertools.product(*axes):
        point_cfg = dict(cfg, pipeline=dict(cfg["pipeline"], threads=n, max_rounds=m, verdicts_per_round=v))
        for problem in problems:
            seed = derive_seed(base_seed, n, m, v, problem.id)
            pconfig = pipeline_config(point_cfg, rng_seed=seed)
            points[config_group_hash(pconfig)] = (n, m, v)
            if (problem.id, config_hash(pconfig)) in existing:
                continue
            try:
                run = run_pipeline(problem, pconfig, backend, judge)
            except PipelineError as exc:
                _log_event({"event": "pipeline_error", "problem_id": problem.id, "error": str(exc)})
                failures += 1
                continue
            store.append(run)
        _log_event({"event": "sweep_point_finished", "threads": n, "max_rounds": m, "verdicts": v})

    grouped: dict[str, list] = {h: [] for h in points}
    for run in store:
        h = config_group_hash(run.config)
        if h in grouped:
            grouped[h].append(run)
    rows = []
    for h, (n, m, v) in points.items():
        runs = grouped[h]
        if not runs:
            continue
        report = selection_accuracy_report(runs, budget_buckets=1)
        mean_tokens = sum(r.total_tokens for r in runs) / len(runs)
        rows.append((f"N={n},M={m},V={v}", mean_tokens, report["pipeline_pass_at_1"], len(runs)))
    csv_path = args.csv or f"{args.store}.scaling.csv"
    write_scaling_csv(rows, csv_path)
    print(f"sweep wrote {len(rows)} scaling points to {csv_path}")
    return 1 if failures else 0


def _judged_runs(store: RunStore) -> list:
    runs = store.read_all()
    if not runs:
        raise AnalysisError(f"run store {store.path} is empty")
    missing = [
        run.problem_id
        for run in runs
        if any(r.exec_result is None for t in run.threads for r in t.rounds)
    ]
    if missing:
        raise AnalysisError(
            "runs without exec results (re-run with a judge attached): " + ", ".join(sorted(set(missing))[:10])
        )
    return runs


def cmd_analyze(args: argparse.Namespace) -> int:
    store = RunStore(args.store)
    out_path = Path(args.out) if args.out else Path(f"{args.store}.{args.kind}.json")

    if args.kind == "selection":
        report = selection_accuracy_report(_judged_runs(store))
        summary = (
            f"pipeline pass@1 {report['pipeline_pass_at_1']:.3f} "
            f"vs oracle {report['oracle_pass_at_n']:.3f} over {report['n_runs']} runs"
        )
    elif args.kind == "passk":
        runs = _judged_runs(store)
        sizes = {run.config.threads for run in runs}
        if len(sizes) != 1:
            raise AnalysisError(f"passk needs a uniform thread count across runs, found {sorted(sizes)}")
        n = sizes.pop()
        counts = [
            sum(t.rounds[0].exec_result.binary_score for t in run.threads if t.rounds)
            for run in runs
        ]
        report = {
            "n_samples": n,
            "n_runs": len(runs),
            "pass_at_k": {
                str(k): sum(pass_at_k(n, c, k) for c in counts) / len(counts) for k in range(1, n + 1)
            },
        }
        summary = f"pass@1 {report['pass_at_k']['1']:.3f}, pass@{n} {report['pass_at_k'][str(n)]:.3f}"
    elif args.kind == "fit":
        runs = _judged_runs(store)
        by_config: dict[str, list] = {}
        for run in runs:
            by_config.setdefault(config_group_hash(run.config), []).append(run)
        points = []
        for h, group in sorted(by_config.items()):
            mean_tokens = sum(r.total_tokens for r in group) / len(group)
            acc = selection_accuracy_report(group, budget_buckets=1)["pipeline_pass_at_1"]
            points.append(ScalingPoint(mean_tokens=mean_tokens, accuracy=acc, label=h))
        fit = loglinear_fit(points)
        report = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "points": [
                {"label": p.label, "mean_tokens": p.mean_tokens, "accuracy": p.accuracy} for p in points
            ],
        }
        summary = f"accuracy = {fit.slope:.4g} * ln(tokens) + {fit.intercept:.4g} (r2 {fit.r_squared:.3f})"
    elif args.kind == "verification":
        runs = _judged_runs(store)
        judgments, truths = [], []
        for run in runs:
            for thread in run.threads:
                for rnd in thread.rounds:
                    truth = rnd.exec_result.binary_score == 1
                    for verdict in rnd.verdicts:
                        judgments.append(verdict.judgment)
                        truths.append(truth)
        report = verification_metrics(judgments, truths)
        report["n_verdicts"] = len(judgments)
        prec = report["precision"]
        rec = report["recall"]
        summary = (
            f"precision {prec:.3f} " if prec is not None else "precision n/a "
        ) + (f"recall {rec:.3f} " if rec is not None else "recall n/a ") + (
            f"accuracy {report['accuracy']:.3f} over {len(judgments)} verdicts"
        )
    else:
        raise ConfigError(f"unknown report kind {args.kind!r}")

    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(summary)
    return 0


def cmd_reward(args: argparse.Namespace) -> int:
    dist = parse_dist_spec(args.dist)
    result = {"reward": rc_reward(args.score, args.length, dist)}
    if args.samples:
        result["mc_estimate"] = rc_reward_mc(args.score, args.length, dist, args.samples, args.seed)
    print(json.dumps(result))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verifine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the pipeline over a problem directory")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--problems", required=True)
    p_run.add_argument("--store", required=True)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a threads/rounds/verdicts grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--sweep", help="sweep spec JSON (defaults to the config's sweep section)")
    p_sweep.add_argument("--store", required=True)
    p_sweep.add_argument("--csv", help="scaling CSV output path")
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analyze", help="report over a run store")
    p_an.add_argument("--store", required=True)
    p_an.add_argument("--kind", required=True, choices=["selection", "passk", "fit", "verification"])
    p_an.add_argument("--out")
    p_an.set_defaults(func=cmd_analyze)

    p_rw = sub.add_parser("reward", help="evaluate length-capped reward shaping")
    p_rw.add_argument("--score", type=int, required=True, choices=[0, 1])
    p_rw.add_argument("--length", type=int, required=True)
    p_rw.add_argument("--dist", required=True, help="hard:L | uniform:a:b | gaussian:mu:sigma | truncexp:rate:upper")
    p_rw.add_argument("--samples", type=int, default=0, help="also report a Monte Carlo estimate")
    p_rw.add_argument("--seed", type=int, default=0)
    p_rw.set_defaults(func=cmd_reward)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PipelineError, AnalysisError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
