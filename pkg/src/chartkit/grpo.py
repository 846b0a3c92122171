"""Clipped-surrogate group-relative policy optimization on the toy policy.

The objective per group is

    (1/G) sum_i min(rho_i * A_i, clip(rho_i, 1-eps, 1+eps) * A_i) - beta * KL

with rho_i the probability ratio against the snapshot (old) policy, A_i the
group-standardized advantage, and KL estimated per sample against the SFT
anchor policy.  The SFT stage minimizes mean negative log-likelihood of
target responses.  Gradients are analytic (softmax Jacobian); the clipped
branch of the min contributes zero gradient when active.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .policy import GroupTooSmall, RolloutGroup, ToyPolicy, VocabMismatch

DEGENERATE_STD = 1e-12


class EmptyBatch(ValueError):
    pass


@dataclass(frozen=True)
class GrpoConfig:
    group_size: int = 8
    clip_eps: float = 0.2
    kl_beta: float = 0.04
    learning_rate: float = 1e-6
    epochs: int = 3
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must be in (0, 1)")
        if self.kl_beta < 0:
            raise ValueError("kl_beta must be nonnegative")


@dataclass(frozen=True)
class SftExample:
    query: str
    target: int


def compute_advantages(rewards: list[float] | np.ndarray) -> np.ndarray:
    """Standardize rewards within the group (population std).

    Constant-reward groups get all-zero advantages instead of dividing by a
    vanishing std.
    """
    r = np.asarray(rewards, dtype=float)
    if r.size < 2:
        raise GroupTooSmall(f"group size {r.size} < 2")
    std = r.std()  # population standard deviation
    if std < DEGENERATE_STD:
        return np.zeros_like(r)
    return (r - r.mean()) / std


def _check_support(a: ToyPolicy, b: ToyPolicy, query: str) -> None:
    if query not in a.vocab or query not in b.vocab:
        raise VocabMismatch(f"query {query!r} missing from a policy")
    if a.vocab[query] != b.vocab[query]:
        raise VocabMismatch(f"vocabularies differ for query {query!r}")


def exact_kl(policy: ToyPolicy, sft: ToyPolicy, query: str) -> float:
    """Exact KL(pi_theta || pi_sft) over the query's categorical support."""
    _check_support(policy, sft, query)
    p = policy.probs(query)
    lp = policy.log_probs(query)
    lq = sft.log_probs(query)
    return float(np.sum(p * (lp - lq)))


def kl_term(policy: ToyPolicy, sft: ToyPolicy, query: str, responses: list[int]) -> float:
    """Per-sample KL estimator mean(r - ln r - 1), r = pi_sft(o)/pi_theta(o).

    Nonnegative pointwise; unbiased for KL(pi_theta || pi_sft) under samples
    from pi_theta.
    """
    _check_support(policy, sft, query)
    lp = policy.log_probs(query)
    lq = sft.log_probs(query)
    log_r = lq[responses] - lp[responses]
    return float(np.mean(np.exp(log_r) - log_r - 1.0))


def sft_nll_loss(policy: ToyPolicy, batch: list[SftExample]) -> float:
    """Mean negative log-likelihood of the target responses."""
    if not batch:
        raise EmptyBatch("sft batch is empty")
    total = 0.0
    for ex in batch:
        total -= policy.log_probs(ex.query)[ex.target]
    return total / len(batch)


def sft_nll_gradient(policy: ToyPolicy, batch: list[SftExample]) -> dict[str, np.ndarray]:
    """d(loss)/d(logits): softmax minus one-hot target, averaged over batch."""
    if not batch:
        raise EmptyBatch("sft batch is empty")
    grad = {q: np.zeros_like(policy.logits[q]) for q in policy.queries}
    for ex in batch:
        g = policy.probs(ex.query).copy()
        g[ex.target] -= 1.0
        grad[ex.query] += g / len(batch)
    return grad


def grpo_objective(
    policy: ToyPolicy,
    old: ToyPolicy,
    sft: ToyPolicy,
    groups: list[RolloutGroup],
    cfg: GrpoConfig,
) -> float:
    """Monte-Carlo estimate of the clipped group-relative objective."""
    if not groups:
        raise EmptyBatch("no rollout groups")
    eps = cfg.clip_eps
    total = 0.0
    for group in groups:
        lp = policy.log_probs(group.query)
        surrogate = 0.0
        for idx, old_lp, adv in zip(group.responses, group.old_logprobs, group.advantages):
            rho = np.exp(lp[idx] - old_lp)
            surrogate += min(rho * adv, np.clip(rho, 1 - eps, 1 + eps) * adv)
        surrogate /= len(group.responses)
        penalty = cfg.kl_beta * kl_term(policy, sft, group.query, group.responses)
        total += surrogate - penalty
    return float(total / len(groups))


def grpo_gradient(
    policy: ToyPolicy,
    old: ToyPolicy,
    sft: ToyPolicy,
    groups: list[RolloutGroup],
    cfg: GrpoConfig,
) -> dict[str, np.ndarray]:
    """Analytic d(objective)/d(logits), matching grpo_objective."""
    if not groups:
        raise EmptyBatch("no rollout groups")
    eps = cfg.clip_eps
    grad = {q: np.zeros_like(policy.logits[q]) for q in policy.queries}
    for group in groups:
        q = group.query
        _check_support(policy, sft, q)
        lp = policy.log_probs(q)
        p = np.exp(lp)
        lq = sft.log_probs(q)
        g = np.zeros_like(p)
        n = len(group.responses)
        for idx, old_lp, adv in zip(group.responses, group.old_logprobs, group.advantages):
            rho = np.exp(lp[idx] - old_lp)
            clipped = np.clip(rho, 1 - eps, 1 + eps)
            # d(log pi(o))/d(logit_j) = delta_{j,o} - p_j
            jac = -p.copy()
            jac[idx] += 1.0
            # Active branch of the min; the clipped branch is locally constant.
            if rho * adv <= clipped * adv:
                g += (rho * adv / n) * jac
            if cfg.kl_beta > 0:
                r = np.exp(lq[idx] - lp[idx])
                # d/dlogits of (r - ln r - 1) is -(r - 1) * d(log pi(o))/dlogits
                g -= cfg.kl_beta * (-(r - 1.0) / n) * jac
        grad[q] += g / len(groups)
    return grad
