import dataclasses
import json

import numpy as np
import pytest

from chartkit import tasks, training
from chartkit.grpo import GrpoConfig, SftExample, exact_kl, sft_nll_loss
from chartkit.policy import ToyPolicy
from chartkit.rewards import GoldAnswer, RewardConfig
from chartkit.training import TraceRecord, TrainingTrace


@pytest.fixture
def bandit():
    return tasks.bundled_bandit_task()


class TestTrainCot:
    def test_converges_to_target(self):
        policy = ToyPolicy({"q": ["a", "b", "c", "d"]})
        trained = training.train_cot(policy, [SftExample("q", 1)], lr=0.5, steps=500)
        assert trained.probs("q")[1] > 0.95

    def test_zero_steps_unchanged(self, bandit):
        policy = bandit.uniform_policy()
        trained = training.train_cot(policy, bandit.sft_examples, lr=0.5, steps=0)
        for q in policy.queries:
            assert np.array_equal(trained.logits[q], policy.logits[q])

    def test_loss_decreases(self, bandit):
        policy = bandit.uniform_policy()
        loss0 = sft_nll_loss(policy, bandit.sft_examples)
        losses = [loss0]
        current = policy
        for _ in range(10):
            current = training.train_cot(current, bandit.sft_examples, lr=0.2, steps=10)
            losses.append(sft_nll_loss(current, bandit.sft_examples))
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
        assert losses[-1] < loss0

    def test_input_policy_not_mutated(self, bandit):
        policy = bandit.uniform_policy()
        before = {q: policy.logits[q].copy() for q in policy.queries}
        training.train_cot(policy, bandit.sft_examples, lr=0.5, steps=50)
        for q in policy.queries:
            assert np.array_equal(policy.logits[q], before[q])


class TestTrainRft:
    def test_bandit_reward_climbs(self, bandit):
        cot = training.train_cot(
            bandit.uniform_policy(), bandit.sft_examples, bandit.cot_lr, bandit.cot_steps
        )
        _, trace = training.train_rft(
            cot, bandit.queries, bandit.gold, bandit.reward_cfg, bandit.grpo_cfg, steps=60
        )
        norm = bandit.reward_cfg.w_acc + bandit.reward_cfg.w_fmt
        assert trace[-1].mean_total_reward / norm > 0.9

    def test_seed_determinism(self, bandit):
        runs = []
        for _ in range(2):
            final, trace = training.train_rft(
                bandit.uniform_policy(),
                bandit.queries,
                bandit.gold,
                bandit.reward_cfg,
                bandit.grpo_cfg,
                steps=20,
            )
            runs.append((final, trace))
        for q in bandit.queries:
            assert np.array_equal(runs[0][0].logits[q], runs[1][0].logits[q])
        assert runs[0][1].records == runs[1][1].records

    def test_kl_anchoring_with_large_beta(self, bandit):
        cfg = dataclasses.replace(bandit.grpo_cfg, kl_beta=1e3, learning_rate=1e-4)
        start = bandit.uniform_policy()
        final, _ = training.train_rft(
            start, bandit.queries, bandit.gold, bandit.reward_cfg, cfg, steps=300
        )
        assert max(exact_kl(final, start, q) for q in bandit.queries) <= 0.01

    def test_identical_rewards_leave_policy_unchanged_without_kl(self):
        vocab = {
            "q": [
                "<think>a</think><answer>7</answer>",
                "<think>b</think><answer>7</answer>",
                "<think>c</think><answer>7</answer>",
            ]
        }
        policy = ToyPolicy(vocab, {"q": np.array([0.3, -0.2, 0.1])})
        cfg = GrpoConfig(kl_beta=0.0, learning_rate=0.5, seed=3)
        final, _ = training.train_rft(
            policy, ["q"], {"q": GoldAnswer.from_raw("7")}, RewardConfig(), cfg, steps=20
        )
        assert np.array_equal(final.logits["q"], policy.logits["q"])

    def test_missing_gold(self, bandit):
        with pytest.raises(KeyError):
            training.train_rft(
                bandit.uniform_policy(), ["nope"], {}, bandit.reward_cfg, bandit.grpo_cfg, steps=1
            )


class TestTrace:
    def make_trace(self):
        return TrainingTrace(
            [
                TraceRecord(0, 1.0, 0.5, 0.5, 12.0, 0.01, 0.001),
                TraceRecord(1, 1.5, 0.75, 0.75, 13.0, 0.02, 0.002),
            ]
        )

    def test_jsonl_round_trip(self, tmp_path):
        trace = self.make_trace()
        path = tmp_path / "trace.jsonl"
        trace.write_jsonl(path)
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        assert lines[0]["step"] == 0
        assert lines[1]["mean_total_reward"] == 1.5
        assert set(lines[0]) == set(TraceRecord.__dataclass_fields__)

    def test_csv_header(self, tmp_path):
        path = tmp_path / "trace.csv"
        self.make_trace().write_csv(path)
        header = path.read_text().splitlines()[0]
        assert header.split(",") == list(TraceRecord.__dataclass_fields__)


class TestGradientCheck:
    def test_sft_and_grpo_pass(self):
        from chartkit.cli import _random_instance

        rng = np.random.default_rng(11)
        policy, old, sft, groups, batch = _random_instance(rng)
        report = training.gradient_check(policy, "sft_nll", 1e-6, sft_batch=batch)
        assert report.passed, report
        for beta in (0.0, 0.04):
            cfg = GrpoConfig(group_size=4, kl_beta=beta)
            report = training.gradient_check(
                policy, "grpo", 1e-5, old=old, sft=sft, groups=groups, grpo_cfg=cfg
            )
            assert report.passed, report

    def test_unknown_kind(self):
        policy = ToyPolicy({"q": ["a", "b"]})
        with pytest.raises(ValueError):
            training.gradient_check(policy, "bogus", 1e-5)
