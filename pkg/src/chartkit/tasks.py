"""Toy task files: queries with response vocabularies and gold answers.

A task JSON bundles everything the two-stage trainer needs: per-query
vocabularies, gold answers, supervised targets, and reward/RL hyper-
parameter overrides.  One bandit task ships as package data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .grpo import GrpoConfig, SftExample
from .policy import ToyPolicy
from .rewards import GoldAnswer, RewardConfig


@dataclass
class ToyTask:
    vocab: dict[str, list[str]]
    gold: dict[str, GoldAnswer]
    sft_examples: list[SftExample]
    reward_cfg: RewardConfig
    grpo_cfg: GrpoConfig
    cot_lr: float = 0.5
    cot_steps: int = 500

    @property
    def queries(self) -> list[str]:
        return list(self.vocab)

    def uniform_policy(self) -> ToyPolicy:
        return ToyPolicy(self.vocab)


def load_task(path: str | Path) -> ToyTask:
    data = json.loads(Path(path).read_text("utf-8"))
    return _task_from_dict(data)


def bundled_bandit_task() -> ToyTask:
    text = resources.files("chartkit").joinpath("data/bandit_task.json").read_text("utf-8")
    return _task_from_dict(json.loads(text))


def _task_from_dict(data: dict) -> ToyTask:
    vocab: dict[str, list[str]] = {}
    gold: dict[str, GoldAnswer] = {}
    sft: list[SftExample] = []
    for entry in data["queries"]:
        qid = entry["id"]
        vocab[qid] = list(entry["vocab"])
        gold[qid] = GoldAnswer.from_raw(entry["gold"])
        if "sft_target" in entry:
            sft.append(SftExample(query=qid, target=int(entry["sft_target"])))
    cot = data.get("cot", {})
    return ToyTask(
        vocab=vocab,
        gold=gold,
        sft_examples=sft,
        reward_cfg=RewardConfig(**data.get("reward", {})),
        grpo_cfg=GrpoConfig(**data.get("grpo", {})),
        cot_lr=float(cot.get("learning_rate", 0.5)),
        cot_steps=int(cot.get("steps", 500)),
    )


def save_checkpoint(policy: ToyPolicy, path: str | Path, stage: str) -> None:
    payload = {
        "stage": stage,
        "vocab": policy.vocab,
        "logits": {q: list(policy.logits[q]) for q in policy.queries},
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ToyPolicy, str]:
    data = json.loads(Path(path).read_text("utf-8"))
    policy = ToyPolicy(data["vocab"], {q: v for q, v in data["logits"].items()})
    return policy, data.get("stage", "unknown")
