from __future__ import annotations

import pytest

from verifine import (
    PipelineConfig,
    Problem,
    SimulatedJudge,
    SimulatorBackend,
    SimulatorParams,
    TestCase,
)


@pytest.fixture
def toy_problem() -> Problem:
    return Problem(
        id="toy",
        statement="Read two integers and print their sum.",
        tests=(TestCase(b"1 2\n", b"3\n"), TestCase(b"5 7\n", b"12\n")),
        time_limit_ms=1000,
        memory_limit_mib=256,
    )


@pytest.fixture
def sim_params() -> SimulatorParams:
    return SimulatorParams(
        p_first_correct=0.3,
        verifier_tpr=0.9,
        verifier_tnr=0.7,
        p_refine_fix=0.35,
        p_refine_break=0.05,
    )


@pytest.fixture
def sim_backend(sim_params) -> SimulatorBackend:
    return SimulatorBackend(sim_params)


@pytest.fixture
def sim_judge() -> SimulatedJudge:
    return SimulatedJudge()


def make_config(**overrides) -> PipelineConfig:
    base = dict(
        threads=2,
        max_rounds=2,
        verdicts_per_round=2,
        max_generation_tokens=100_000,
        concurrency_cap=1,
        rng_seed=7,
        backend_id="simulator",
        judge_attached=False,
    )
    base.update(overrides)
    return PipelineConfig(**base)
