"""Analysis math over trajectories and run stores.

Covers per-turn reward assignment, the two advantage estimators, the clipped
surrogate term, discounted returns, verifier quality metrics, the unbiased
pass@k estimator, log-linear scaling fits, and selection-accuracy reports.
All functions are pure; nothing here touches a model or mutates its inputs.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .backends import SimulatorParams
from .domain import Role, RoundRecord, RunRecord, ScalingPoint, Termination, ThreadRecord

logger = logging.getLogger(__name__)


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class TurnReward:
    turn_index: int
    role: Role
    reward: float


@dataclass(frozen=True)
class TurnRewardTable:
    """Ordered per-turn rewards for one thread's trajectory.

    Turns alternate: solution (generation or refinement) then verification,
    so round k occupies turn indices 2k-1 and 2k.
    """

    turns: tuple[TurnReward, ...]

    def __post_init__(self) -> None:
        indices = [t.turn_index for t in self.turns]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise AnalysisError("turn indices must be strictly increasing")

    def rewards(self) -> list[float]:
        return [t.reward for t in self.turns]


def per_turn_rewards(thread: ThreadRecord) -> TurnRewardTable:
    """Assign the per-turn rewards for one trajectory.

    Solution turns earn the candidate's execution score. Verification turns
    earn 1 when the verdict agrees with the execution result of the solution
    they reviewed, else 0. With several verdicts per round, the round's first
    verdict stands in for the verification turn (the single-verdict training
    convention).
    """
    turns: list[TurnReward] = []
    for k, rnd in enumerate(thread.rounds, start=1):
        if rnd.exec_result is None:
            raise AnalysisError(
                f"round {k} of thread {thread.thread_index} has no exec_result; "
                "attach a judge before computing per-turn rewards"
            )
        exec_score = rnd.exec_result.binary_score
        solution_role = Role.GENERATION if k == 1 else Role.REFINEMENT
        turns.append(TurnReward(2 * k - 1, solution_role, float(exec_score)))
        verdict = rnd.verdicts[0]
        agree = 1.0 if int(verdict.judgment) == exec_score else 0.0
        turns.append(TurnReward(2 * k, Role.VERIFICATION, agree))
    return TurnRewardTable(tuple(turns))


@dataclass(frozen=True)
class AdvantageBatch:
    """Per-trajectory, per-turn rewards and advantages plus estimator metadata."""

    estimator: str
    tables: tuple[TurnRewardTable, ...]
    advantages: tuple[tuple[float, ...], ...]
    turn_means: dict[int, float] | None = None
    mean: float | None = None
    std: float | None = None
    delta: float | None = None


def grpo_advantages(batch: Sequence[TurnRewardTable]) -> AdvantageBatch:
    """Turn-grouped mean-centering: A_t = r_t - mean_batch(r_t).

    The mean at turn t is taken over the trajectories that have a turn t;
    shorter trajectories are simply absent from later groups. No division by
    the group standard deviation. A group of size one carries no variance
    information, so its advantage is 0 (with a warning).
    """
    if not batch:
        raise AnalysisError("advantage batch must be nonempty")
    groups: dict[int, list[float]] = {}
    for table in batch:
        for turn in table.turns:
            groups.setdefault(turn.turn_index, []).append(turn.reward)
    means = {t: sum(rs) / len(rs) for t, rs in groups.items()}
    for t, rs in sorted(groups.items()):
        if len(rs) == 1:
            logger.warning("turn group %d has a single trajectory; advantage forced to 0", t)

    advantages = tuple(
        tuple(
            0.0 if len(groups[turn.turn_index]) == 1 else turn.reward - means[turn.turn_index]
            for turn in table.turns
        )
        for table in batch
    )
    return AdvantageBatch(
        estimator="turn_grouped_grpo",
        tables=tuple(batch),
        advantages=advantages,
        turn_means=means,
    )


def whitened_advantages(batch: Sequence[TurnRewardTable], delta: float = 1e-8) -> AdvantageBatch:
    """Batch-level whitening: A = (r - mean) / (std + delta), roles pooled.

    Mean and std are taken over the flat multiset of every reward in the
    batch regardless of role. When all rewards are equal, std is 0 and the
    delta guard sends every advantage to 0.
    """
    flat = [turn.reward for table in batch for turn in table.turns]
    if len(flat) < 2:
        raise AnalysisError("whitening needs at least two turns in the batch")
    mean = float(np.mean(flat))
    std = float(np.std(flat))
    advantages = tuple(
        tuple((turn.reward - mean) / (std + delta) for turn in table.turns) for table in batch
    )
    return AdvantageBatch(
        estimator="batch_whitened",
        tables=tuple(batch),
        advantages=advantages,
        mean=mean,
        std=std,
        delta=delta,
    )


def ppo_clip_term(ratio: float, advantage: float, epsilon: float = 0.2) -> float:
    """min(ratio * A, clip(ratio, 1-eps, 1+eps) * A); negate and average for the loss."""
    if ratio <= 0:
        raise AnalysisError("importance ratio must be positive")
    if not 0 < epsilon < 1:
        raise AnalysisError("epsilon must be in (0, 1)")
    clipped = min(max(ratio, 1.0 - epsilon), 1.0 + epsilon)
    return min(ratio * advantage, clipped * advantage)


def discounted_returns(rewards: Sequence[float], gamma: float) -> list[float]:
    """Suffix-discounted sums R_t = sum_{k>=t} gamma^(k-t) * r_k.

    gamma = 0 leaves the rewards unchanged (each turn keeps only its own
    immediate reward).
    """
    if not 0 <= gamma <= 1:
        raise AnalysisError("gamma must be in [0, 1]")
    returns = [0.0] * len(rewards)
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        returns[i] = acc
    return returns


def verification_metrics(
    judgments: Sequence[bool], truths: Sequence[bool]
) -> dict[str, float | None]:
    """Precision / recall / accuracy with positive class = "judged correct".

    Precision is absent (None) when there are no positive predictions, and
    recall is absent when there are no actually-correct samples, rather than
    being reported as 0.
    """
    if len(judgments) != len(truths) or not judgments:
        raise AnalysisError("judgments and truths must be nonempty and of equal length")
    tp = sum(1 for j, t in zip(judgments, truths) if j and t)
    fp = sum(1 for j, t in zip(judgments, truths) if j and not t)
    fn = sum(1 for j, t in zip(judgments, truths) if not j and t)
    tn = len(judgments) - tp - fp - fn
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    accuracy = (tp + tn) / len(judgments)
    return {"precision": precision, "recall": recall, "accuracy": accuracy}


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator 1 - C(n-c, k) / C(n, k).

    Probability that a uniformly chosen size-k subset of the n samples
    contains at least one of the c correct ones. Evaluated as a running
    product so large n never overflows.
    """
    if not 0 <= c <= n:
        raise AnalysisError("need 0 <= c <= n")
    if not 1 <= k <= n:
        raise AnalysisError("need 1 <= k <= n")
    if n - c < k:
        return 1.0
    miss = 1.0
    for i in range(k):
        miss *= (n - c - i) / (n - i)
    return 1.0 - miss


@dataclass(frozen=True)
class LogLinearFit:
    """Least-squares fit of accuracy against ln(mean tokens)."""

    slope: float
    intercept: float
    r_squared: float

    def predict(self, mean_tokens: float) -> float:
        if mean_tokens <= 0:
            raise AnalysisError("mean_tokens must be > 0")
        return self.slope * math.log(mean_tokens) + self.intercept

    def tokens_for(self, accuracy: float) -> float:
        """Invert the fit: the mean token count at which it predicts ``accuracy``."""
        if self.slope == 0:
            raise AnalysisError("flat fit cannot be inverted")
        return math.exp((accuracy - self.intercept) / self.slope)


def loglinear_fit(points: Sequence[ScalingPoint]) -> LogLinearFit:
    """Ordinary least squares of accuracy on the natural log of mean tokens."""
    if len(points) < 2:
        raise AnalysisError("log-linear fit needs at least 2 points")
    x = np.array([math.log(p.mean_tokens) for p in points])
    y = np.array([p.accuracy for p in points])
    if np.allclose(x, x[0]):
        raise AnalysisError("log-linear fit needs at least two distinct token counts")
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-300:
        r_squared = 1.0 if ss_res <= 1e-12 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return LogLinearFit(slope=float(slope), intercept=float(intercept), r_squared=r_squared)


def _selected_round(run: RunRecord) -> RoundRecord:
    thread = next(t for t in run.threads if t.thread_index == run.selected.thread_index)
    return thread.rounds[run.selected.round_index - 1]


def selection_accuracy_report(runs: Sequence[RunRecord], budget_buckets: int = 5) -> dict:
    """Pipeline accuracy vs. the execution oracle over a batch of judged runs.

    Pipeline accuracy is the fraction of runs whose selected candidate passes
    execution; the oracle is the fraction with any passing candidate anywhere
    in the run. The curve buckets runs by total token spend (equal-count
    buckets) and reports accuracy per bucket.
    """
    if not runs:
        raise AnalysisError("selection report needs at least one run")
    selected_correct = []
    any_correct = []
    tokens = []
    for run in runs:
        for thread in run.threads:
            for rnd in thread.rounds:
                if rnd.exec_result is None:
                    raise AnalysisError(
                        f"run for problem {run.problem_id!r} is missing exec results; "
                        "selection accuracy needs judged runs"
                    )
        selected_correct.append(_selected_round(run).exec_result.binary_score)
        any_correct.append(
            int(
                any(
                    rnd.exec_result.binary_score == 1
                    for thread in run.threads
                    for rnd in thread.rounds
                )
            )
        )
        tokens.append(run.total_tokens)

    order = np.argsort(tokens, kind="stable")
    buckets = []
    n_buckets = min(budget_buckets, len(runs))
    for chunk in np.array_split(order, n_buckets):
        if len(chunk) == 0:
            continue
        buckets.append(
            {
                "mean_tokens": float(np.mean([tokens[i] for i in chunk])),
                "accuracy": float(np.mean([selected_correct[i] for i in chunk])),
                "n_runs": int(len(chunk)),
            }
        )
    return {
        "n_runs": len(runs),
        "pipeline_pass_at_1": float(np.mean(selected_correct)),
        "oracle_pass_at_n": float(np.mean(any_correct)),
        "per_budget_curve": buckets,
    }


def write_scaling_csv(rows: Iterable[tuple[str, float, float, int]], path: str | Path) -> None:
    """Write a scaling curve: columns label, mean_tokens, accuracy, n_runs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "mean_tokens", "accuracy", "n_runs"])
        for label, mean_tokens, accuracy, n_runs in rows:
            writer.writerow([label, f"{mean_tokens:.6g}", f"{accuracy:.6g}", n_runs])


def _binom_pmf(n: int, k: int, p: float) -> float:
    return math.comb(n, k) * p**k * (1.0 - p) ** (n - k)


def thread_success_probability(params: SimulatorParams, max_rounds: int, verdicts: int) -> float:
    """Exact single-thread success probability under the simulator model.

    Treats one sequential thread as a Markov chain over (candidate
    correctness, best-scored earlier round) and returns the probability that
    the round the selection rule would pick is correct. A unanimous round
    always wins (earlier rounds scored strictly lower, or the thread would
    have stopped sooner); otherwise the best score wins with earlier rounds
    preferred on ties. Verdicts within a round are independent coin flips
    with rate tpr for correct candidates and (1 - tnr) for incorrect ones.
    """
    if max_rounds < 1 or verdicts < 1:
        raise AnalysisError("max_rounds and verdicts must be >= 1")
    tpr, tnr = params.verifier_tpr, params.verifier_tnr

    # State: (latent, best_score, best_correct) -> probability mass.
    # best_score -1 means no completed non-unanimous round yet.
    states: dict[tuple[int, int, int], float] = {
        (1, -1, 0): params.p_first_correct,
        (0, -1, 0): 1.0 - params.p_first_correct,
    }
    success = 0.0
    for round_index in range(1, max_rounds + 1):
        next_states: dict[tuple[int, int, int], float] = {}
        for (latent, best_score, best_correct), mass in states.items():
            if mass == 0.0:
                continue
            p_pos = tpr if latent else 1.0 - tnr
            p_stop = p_pos**verdicts
            if latent:
                success += mass * p_stop
            for score in range(verdicts):
                p_score = mass * _binom_pmf(verdicts, score, p_pos)
                if p_score == 0.0:
                    continue
                if score > best_score:
                    nb_score, nb_correct = score, latent
                else:
                    nb_score, nb_correct = best_score, best_correct
                if round_index == max_rounds:
                    success += p_score * nb_correct
                    continue
                if latent:
                    fates = ((1, 1.0 - params.p_refine_break), (0, params.p_refine_break))
                else:
                    fates = ((1, params.p_refine_fix), (0, 1.0 - params.p_refine_fix))
                for new_latent, p_fate in fates:
                    if p_fate == 0.0:
                        continue
                    key = (new_latent, nb_score, nb_correct)
                    next_states[key] = next_states.get(key, 0.0) + p_score * p_fate
        states = next_states
    return success
