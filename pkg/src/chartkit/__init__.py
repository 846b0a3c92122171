"""Chart-reasoning toolkit: verifiable rewards, toy group-relative RL,
programmatic chart-QA synthesis, and relaxed-accuracy evaluation."""

from .grpo import GrpoConfig, SftExample, compute_advantages, exact_kl, grpo_objective
from .policy import RolloutGroup, ToyPolicy, sample_group
from .rewards import (
    AnswerKind,
    GoldAnswer,
    ParsedResponse,
    RewardBreakdown,
    RewardConfig,
    accuracy_reward,
    format_reward,
    numeric_reward,
    parse_response,
    string_reward,
    total_reward,
)

__version__ = "0.1.0"

__all__ = [
    "AnswerKind",
    "GoldAnswer",
    "GrpoConfig",
    "ParsedResponse",
    "RewardBreakdown",
    "RewardConfig",
    "RolloutGroup",
    "SftExample",
    "ToyPolicy",
    "accuracy_reward",
    "compute_advantages",
    "exact_kl",
    "format_reward",
    "grpo_objective",
    "numeric_reward",
    "parse_response",
    "sample_group",
    "string_reward",
    "total_reward",
]
