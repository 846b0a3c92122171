"""Categorical toy policy over a finite per-query response vocabulary.

Each query has its own list of candidate response texts and a logit vector
over them.  The policy is sequence-level: one vocabulary entry stands for a
complete response, so log-probabilities, KL divergences, and gradients are
all exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GroupTooSmall(ValueError):
    pass


class VocabMismatch(ValueError):
    pass


class ToyPolicy:
    """Independent categorical distribution per query, parameterized by logits."""

    def __init__(self, vocab: dict[str, list[str]], logits: dict[str, np.ndarray] | None = None):
        for q, responses in vocab.items():
            if len(responses) < 2:
                raise ValueError(f"query {q!r} needs at least 2 candidate responses")
        self.vocab = {q: list(v) for q, v in vocab.items()}
        if logits is None:
            logits = {q: np.zeros(len(v)) for q, v in vocab.items()}
        self.logits = {}
        for q, v in vocab.items():
            arr = np.asarray(logits[q], dtype=float)
            if arr.shape != (len(v),):
                raise ValueError(f"logits for {q!r} have shape {arr.shape}, expected ({len(v)},)")
            self.logits[q] = arr.copy()

    @property
    def queries(self) -> list[str]:
        return list(self.vocab)

    def log_probs(self, query: str) -> np.ndarray:
        z = self.logits[query]
        return z - _logsumexp(z)

    def probs(self, query: str) -> np.ndarray:
        return np.exp(self.log_probs(query))

    def copy(self) -> "ToyPolicy":
        return ToyPolicy(self.vocab, self.logits)

    # Flat parameter views, used by the finite-difference gradient checker.
    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.logits[q] for q in self.queries])

    def set_flat(self, flat: np.ndarray) -> None:
        offset = 0
        for q in self.queries:
            n = len(self.vocab[q])
            self.logits[q] = np.asarray(flat[offset : offset + n], dtype=float).copy()
            offset += n
        if offset != len(flat):
            raise ValueError("flat parameter vector has wrong length")


def _logsumexp(z: np.ndarray) -> float:
    m = np.max(z)
    return m + np.log(np.sum(np.exp(z - m)))


@dataclass
class RolloutGroup:
    """One query with G sampled responses scored under the old policy."""

    query: str
    responses: list[int]
    old_logprobs: list[float]
    rewards: list[float]
    advantages: list[float]

    def __post_init__(self):
        g = len(self.responses)
        if g < 2:
            raise GroupTooSmall(f"group size {g} < 2")
        if not (len(self.old_logprobs) == len(self.rewards) == len(self.advantages) == g):
            raise ValueError("rollout group fields must have identical length")


def sample_group(
    policy: ToyPolicy, query: str, group_size: int, rng: np.random.Generator
) -> tuple[list[int], list[float]]:
    """Draw G i.i.d. responses for a query; returns indices and log-probs."""
    if group_size < 2:
        raise GroupTooSmall(f"group size {group_size} < 2")
    p = policy.probs(query)
    lp = policy.log_probs(query)
    draws = rng.choice(len(p), size=group_size, p=p)
    return [int(i) for i in draws], [float(lp[i]) for i in draws]
