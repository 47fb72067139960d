"""Parallel solve/verify/refine pipelines with judged rewards and scaling analytics."""

from .analytics import (
    AdvantageBatch,
    LogLinearFit,
    TurnReward,
    TurnRewardTable,
    discounted_returns,
    grpo_advantages,
    loglinear_fit,
    pass_at_k,
    per_turn_rewards,
    ppo_clip_term,
    selection_accuracy_report,
    thread_success_probability,
    verification_metrics,
    whitened_advantages,
)
from .backends import (
    Backend,
    BackendCallError,
    BackendError,
    BackendRequest,
    CallContext,
    HttpBackend,
    ReplayBackend,
    SimulatedJudge,
    SimulatorBackend,
    SimulatorParams,
    call_seed_for,
    derive_seed,
    latent_correctness,
    parse_verdict,
)
from .domain import (
    Candidate,
    ClipDistribution,
    CompareMode,
    ExecReport,
    ExecStatus,
    ParseStatus,
    PipelineConfig,
    Problem,
    Role,
    RoundRecord,
    RunRecord,
    ScalingPoint,
    Selection,
    Termination,
    TestCase,
    ThreadRecord,
    ValidationError,
    Verdict,
    validate_run,
)
from .judge import (
    CompiledArtifact,
    CompileFailure,
    ExecutionJudge,
    JudgeEnvironmentError,
    ToolchainProfile,
    extract_source,
)
from .orchestrator import (
    PipelineError,
    SelectionError,
    run_pipeline,
    run_thread,
    select_final,
    token_totals,
    verify_candidate,
)
from .prompts import (
    GENERATION_TEMPLATE,
    REFINEMENT_TEMPLATE,
    VERIFICATION_TEMPLATE,
    PromptContractError,
    render_prompt,
)
from .rewards import cap_cdf, hard_clip_reward, rc_reward, rc_reward_mc
from .store import (
    RunStore,
    deserialize_run,
    load_problem,
    load_problems,
    save_problem,
    serialize_run,
)

__version__ = "0.1.0"
