"""Two-stage toy training: supervised cold start, then RL fine-tuning.

Stage one minimizes target-response NLL by plain gradient descent.  Stage
two runs the group-relative RL loop: snapshot the old policy, sample a
group per query, score the sampled texts with the rule-based reward,
standardize within each group, and ascend the analytic objective gradient.
Both stages are single-threaded and bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import grpo
from .grpo import GrpoConfig, SftExample
from .policy import RolloutGroup, ToyPolicy, sample_group
from .rewards import GoldAnswer, RewardConfig, total_reward


@dataclass(frozen=True)
class TraceRecord:
    step: int
    mean_total_reward: float
    mean_accuracy_reward: float
    mean_format_reward: float
    mean_response_length: float
    objective: float
    exact_kl: float


_TRACE_FIELDS = list(TraceRecord.__dataclass_fields__)


class TrainingTrace:
    """Per-step training metrics, serializable to CSV or JSONL."""

    def __init__(self, records: list[TraceRecord] | None = None):
        self.records = list(records or [])

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i: int) -> TraceRecord:
        return self.records[i]

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(asdict(rec)) + "\n")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=_TRACE_FIELDS)
            writer.writeheader()
            for rec in self.records:
                writer.writerow(asdict(rec))


def response_length(text: str) -> int:
    """Whitespace token count, the toy stand-in for response length."""
    return len(text.split())


def train_cot(
    policy: ToyPolicy,
    sft_data: list[SftExample],
    lr: float,
    steps: int,
    seed: int = 0,
) -> ToyPolicy:
    """Gradient descent on mean target NLL; returns an updated copy."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    out = policy.copy()
    for _ in range(steps):
        grad = grpo.sft_nll_gradient(out, sft_data)
        for q in out.queries:
            if q in grad:
                out.logits[q] -= lr * grad[q]
    return out


def train_rft(
    policy: ToyPolicy,
    rl_queries: list[str],
    gold_answers: dict[str, GoldAnswer],
    reward_cfg: RewardConfig,
    grpo_cfg: GrpoConfig,
    steps: int = 300,
) -> tuple[ToyPolicy, TrainingTrace]:
    """RL fine-tuning loop with the policy itself as the KL anchor at step 0."""
    for q in rl_queries:
        if q not in gold_answers:
            raise KeyError(f"no gold answer for query {q!r}")
    current = policy.copy()
    sft_anchor = policy.copy()
    rng = np.random.default_rng(grpo_cfg.seed)
    trace = TrainingTrace()

    for step in range(steps):
        old = current.copy()
        groups: list[RolloutGroup] = []
        totals, accs, fmts, lengths = [], [], [], []
        for q in rl_queries:
            indices, logprobs = sample_group(old, q, grpo_cfg.group_size, rng)
            rewards = []
            for idx in indices:
                text = old.vocab[q][idx]
                breakdown = total_reward(text, gold_answers[q], reward_cfg)
                rewards.append(breakdown.total)
                totals.append(breakdown.total)
                accs.append(breakdown.accuracy)
                fmts.append(breakdown.format)
                lengths.append(response_length(text))
            advantages = grpo.compute_advantages(rewards)
            groups.append(
                RolloutGroup(
                    query=q,
                    responses=indices,
                    old_logprobs=logprobs,
                    rewards=rewards,
                    advantages=list(advantages),
                )
            )

        objective = grpo.grpo_objective(current, old, sft_anchor, groups, grpo_cfg)
        grad = grpo.grpo_gradient(current, old, sft_anchor, groups, grpo_cfg)
        for q in current.queries:
            if q in grad:
                current.logits[q] += grpo_cfg.learning_rate * grad[q]

        kl = float(np.mean([grpo.exact_kl(current, sft_anchor, q) for q in rl_queries]))
        trace.append(
            TraceRecord(
                step=step,
                mean_total_reward=float(np.mean(totals)),
                mean_accuracy_reward=float(np.mean(accs)),
                mean_format_reward=float(np.mean(fmts)),
                mean_response_length=float(np.mean(lengths)),
                objective=objective,
                exact_kl=kl,
            )
        )
    return current, trace


@dataclass(frozen=True)
class GradientCheckReport:
    objective_kind: str
    max_rel_error: float
    passed: bool
    tol: float


def _finite_difference(fn, policy: ToyPolicy, step: float = 1e-5) -> np.ndarray:
    x0 = policy.get_flat()
    probe = policy.copy()
    fd = np.zeros_like(x0)
    for j in range(len(x0)):
        x = x0.copy()
        x[j] = x0[j] + step
        probe.set_flat(x)
        f_plus = fn(probe)
        x[j] = x0[j] - step
        probe.set_flat(x)
        f_minus = fn(probe)
        fd[j] = (f_plus - f_minus) / (2 * step)
    return fd


def _flatten_grad(policy: ToyPolicy, grad: dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([grad[q] for q in policy.queries])


def gradient_check(
    policy: ToyPolicy,
    objective_kind: str,
    tol: float,
    *,
    sft_batch: list[SftExample] | None = None,
    old: ToyPolicy | None = None,
    sft: ToyPolicy | None = None,
    groups: list[RolloutGroup] | None = None,
    grpo_cfg: GrpoConfig | None = None,
    fd_step: float = 1e-5,
) -> GradientCheckReport:
    """Compare the analytic gradient to central finite differences.

    Relative error is max |analytic - fd| over the largest gradient
    magnitude, so near-zero components do not blow up the ratio.
    """
    if objective_kind == "sft_nll":
        if sft_batch is None:
            raise ValueError("sft_nll check needs sft_batch")
        analytic = _flatten_grad(policy, grpo.sft_nll_gradient(policy, sft_batch))
        fd = _finite_difference(lambda p: grpo.sft_nll_loss(p, sft_batch), policy, fd_step)
    elif objective_kind == "grpo":
        if old is None or sft is None or groups is None or grpo_cfg is None:
            raise ValueError("grpo check needs old, sft, groups, grpo_cfg")
        analytic = _flatten_grad(policy, grpo.grpo_gradient(policy, old, sft, groups, grpo_cfg))
        fd = _finite_difference(
            lambda p: grpo.grpo_objective(p, old, sft, groups, grpo_cfg), policy, fd_step
        )
    else:
        raise ValueError(f"unknown objective_kind {objective_kind!r}")

    scale = max(float(np.max(np.abs(fd))), float(np.max(np.abs(analytic))), 1e-12)
    max_rel = float(np.max(np.abs(analytic - fd)) / scale)
    return GradientCheckReport(
        objective_kind=objective_kind,
        max_rel_error=max_rel,
        passed=max_rel < tol,
        tol=tol,
    )
