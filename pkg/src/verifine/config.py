"""Structured JSON config: sections pipeline, backend, judge, problems, sweep.

Secrets never live in the file; the backend section names an environment
variable (``api_key_env``) that holds the API key.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from .backends import HttpBackend, SimulatedJudge, SimulatorBackend, SimulatorParams
from .domain import PipelineConfig, ValidationError
from .judge import DEFAULT_TOOLCHAINS, ExecutionJudge, ToolchainProfile


class ConfigError(ValueError):
    pass


def load_config(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cfg


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required config key {where}.{key}")
    return section[key]


def backend_id_of(cfg: dict[str, Any]) -> str:
    backend = cfg.get("backend", {})
    kind = _require(backend, "kind", "backend")
    if kind == "simulator":
        return "simulator"
    if kind == "http":
        return f"http:{_require(backend, 'model', 'backend')}"
    if kind == "replay":
        return "replay"
    raise ConfigError(f"backend.kind must be one of http, simulator, replay (got {kind!r})")


def pipeline_config(cfg: dict[str, Any], rng_seed: int | None = None) -> PipelineConfig:
    section = cfg.get("pipeline")
    if section is None:
        raise ConfigError("missing required config section pipeline")
    try:
        return PipelineConfig(
            threads=_require(section, "threads", "pipeline"),
            max_rounds=_require(section, "max_rounds", "pipeline"),
            verdicts_per_round=_require(section, "verdicts_per_round", "pipeline"),
            max_generation_tokens=_require(section, "max_generation_tokens", "pipeline"),
            concurrency_cap=section.get("concurrency_cap", 8),
            rng_seed=rng_seed if rng_seed is not None else _require(section, "rng_seed", "pipeline"),
            backend_id=backend_id_of(cfg),
            judge_attached=section.get("judge_attached", False),
            max_verification_tokens=section.get("max_verification_tokens"),
            temperature=section.get("temperature", 1.0),
        )
    except ValidationError as exc:
        raise ConfigError(f"invalid pipeline config: {exc}") from exc


def simulator_params(cfg: dict[str, Any]) -> SimulatorParams:
    backend = cfg.get("backend", {})
    sim = backend.get("simulator")
    if sim is None:
        raise ConfigError("missing required config key backend.simulator")
    try:
        return SimulatorParams(**sim)
    except TypeError as exc:
        raise ConfigError(f"bad backend.simulator parameters: {exc}") from exc
    except ValidationError as exc:
        raise ConfigError(f"bad backend.simulator parameters: {exc}") from exc


def build_backend(cfg: dict[str, Any]):
    """Instantiate the configured backend (replay is handled by the caller,
    which owns the store lookup per problem)."""
    backend = cfg.get("backend", {})
    kind = _require(backend, "kind", "backend")
    if kind == "simulator":
        return SimulatorBackend(simulator_params(cfg))
    if kind == "http":
        return HttpBackend(
            url=_require(backend, "url", "backend"),
            model=_require(backend, "model", "backend"),
            api_key_env=backend.get("api_key_env"),
            timeout_s=backend.get("timeout_s", 300.0),
            max_attempts=backend.get("max_attempts", 3),
            backoff_s=backend.get("backoff_s", 1.0),
        )
    if kind == "replay":
        raise ConfigError("replay backends are built per problem from backend.replay_store")
    raise ConfigError(f"backend.kind must be one of http, simulator, replay (got {kind!r})")


def build_judge(cfg: dict[str, Any]):
    """Judge per config; defaults to the latent-channel stub for simulators."""
    pipeline = cfg.get("pipeline", {})
    if not pipeline.get("judge_attached", False):
        return None
    judge_cfg = cfg.get("judge", {})
    backend_kind = cfg.get("backend", {}).get("kind")
    kind = judge_cfg.get("kind", "simulated" if backend_kind == "simulator" else "execution")
    if kind == "simulated":
        return SimulatedJudge()
    if kind != "execution":
        raise ConfigError(f"judge.kind must be execution or simulated (got {kind!r})")
    toolchains = dict(DEFAULT_TOOLCHAINS)
    for name, spec in judge_cfg.get("toolchains", {}).items():
        toolchains[name] = ToolchainProfile(
            name=name,
            run_cmd=_require(spec, "run_cmd", f"judge.toolchains.{name}"),
            compile_cmd=spec.get("compile_cmd"),
            source_suffix=spec.get("source_suffix", ".txt"),
        )
    return ExecutionJudge(
        toolchains=toolchains,
        default_toolchain=judge_cfg.get("default_toolchain", "cpp"),
        max_parallel=judge_cfg.get("max_parallel", 2),
        time_slack_ms=judge_cfg.get("time_slack_ms", 100),
    )


def config_hash(pipeline_cfg: PipelineConfig) -> str:
    """Stable digest of a run's pipeline config, for resume matching."""
    from .store import _config_dict

    canonical = json.dumps(_config_dict(pipeline_cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def config_group_hash(pipeline_cfg: PipelineConfig) -> str:
    """Digest ignoring the seed: one configuration point across many seeded runs."""
    from .store import _config_dict

    doc = _config_dict(pipeline_cfg)
    doc.pop("rng_seed")
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
