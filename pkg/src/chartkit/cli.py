"""Command-line entry point.

Subcommands: synth run, synth stats, train cot, train rft, eval score,
check gradients.  Exit codes: 0 success, 1 validation/usage error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evalscore, pipeline, synth, tasks, training
from .config import ConfigError, load_config
from .grpo import GrpoConfig
from .policy import ToyPolicy
from .rewards import AnswerKind, GoldAnswer, RewardConfig

logger = logging.getLogger("chartkit")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chartkit",
        description="Chart-reasoning data synthesis, toy RL training, and scoring.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    top = parser.add_subparsers(dest="command", required=True)

    p_synth = top.add_parser("synth", help="data synthesis commands")
    synth_sub = p_synth.add_subparsers(dest="subcommand", required=True)
    p_run = synth_sub.add_parser("run", help="run the full synthesis pipeline")
    p_run.add_argument("--config", required=True, help="TOML config file")
    p_run.add_argument("--mock", action="store_true", help="force mock LLM and executor")
    p_run.add_argument("--seed", type=int, default=None, help="override pipeline seed")
    p_stats = synth_sub.add_parser("stats", help="token-length statistics for an instance file")
    p_stats.add_argument("--instances", required=True, help="instances JSONL file")
    p_stats.add_argument("--json", action="store_true", help="emit JSON instead of a table")

    p_train = top.add_parser("train", help="toy two-stage training")
    train_sub = p_train.add_subparsers(dest="subcommand", required=True)
    p_cot = train_sub.add_parser("cot", help="supervised stage on target responses")
    p_cot.add_argument("--task", default=None, help="task JSON (default: bundled bandit)")
    p_cot.add_argument("--out", required=True, help="checkpoint output path")
    p_cot.add_argument("--lr", type=float, default=None, help="override learning rate")
    p_cot.add_argument("--steps", type=int, default=None, help="override step count")
    p_rft = train_sub.add_parser("rft", help="RL stage with group-relative optimization")
    p_rft.add_argument("--task", default=None, help="task JSON (default: bundled bandit)")
    p_rft.add_argument("--init", default=None, help="checkpoint to start from")
    p_rft.add_argument(
        "--require-cot",
        action="store_true",
        help="refuse to run without a supervised-stage checkpoint",
    )
    p_rft.add_argument("--out", required=True, help="checkpoint output path")
    p_rft.add_argument("--trace", default=None, help="training trace output path")
    p_rft.add_argument(
        "--trace-format", choices=("jsonl", "csv"), default="jsonl", help="trace file format"
    )
    p_rft.add_argument("--steps", type=int, default=300, help="number of RL steps")
    p_rft.add_argument("--lr", type=float, default=None, help="override learning rate")
    p_rft.add_argument("--seed", type=int, default=None, help="override sampling seed")

    p_eval = top.add_parser("eval", help="score prediction files")
    eval_sub = p_eval.add_subparsers(dest="subcommand", required=True)
    p_score = eval_sub.add_parser("score", help="score predictions against gold instances")
    p_score.add_argument("--pred", required=True, help="predictions JSONL ({id, output})")
    p_score.add_argument("--gold", required=True, help="gold instance JSONL")
    p_score.add_argument("--format", choices=("markdown", "json"), default="markdown")
    p_score.add_argument("--threshold", type=float, default=1.0)
    p_score.add_argument("--out", default=None, help="write report to file instead of stdout")

    p_check = top.add_parser("check", help="self-checks")
    check_sub = p_check.add_subparsers(dest="subcommand", required=True)
    p_grad = check_sub.add_parser("gradients", help="finite-difference gradient check")
    p_grad.add_argument("--tol", type=float, default=1e-5)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--instances", type=int, default=5, help="random instances per objective")

    return parser


def _cmd_synth_run(args) -> int:
    cfg = load_config(args.config)
    if cfg.pipeline is None:
        raise ConfigError("config has no [paths] section; nothing to synthesize")
    pipe = cfg.pipeline
    if args.mock:
        pipe = dataclasses.replace(pipe, mock=True)
    if args.seed is not None:
        pipe = dataclasses.replace(pipe, seed=args.seed)
    logger.info("resolved pipeline config: %s", json.dumps(pipe.snapshot(), sort_keys=True))
    manifest = pipeline.run_pipeline(pipe)
    print(f"run {manifest.run_id}: {json.dumps(manifest.counts)}")
    print(f"splits: {json.dumps(manifest.split_sizes)}")
    print(f"manifest written to {pipe.out_dir / pipeline.MANIFEST_FILENAME}")
    return EXIT_OK


def _instances_from_records(records: list[dict]) -> list[synth.ReasoningInstance]:
    instances = []
    for r in records:
        instances.append(
            synth.ReasoningInstance(
                id=r["id"],
                image_ref=Path(r["image"]),
                code=r.get("code", ""),
                question=r["question"],
                think=r["think"],
                answer=GoldAnswer(raw=r["answer"], kind=AnswerKind(r["answer_kind"])),
                arity=synth.Arity(r["arity"]),
                chart_type=r.get("chart_type", ""),
                split=synth.Split(r.get("split", "unassigned")),
            )
        )
    return instances


def _cmd_synth_stats(args) -> int:
    records = pipeline.read_instances_jsonl(Path(args.instances))
    stats = synth.compute_stats(_instances_from_records(records))
    if args.json:
        payload = {
            "empty": stats.empty,
            "rows": {k: dataclasses.asdict(v) for k, v in stats.rows.items()},
            "by_split": {
                s: {k: dataclasses.asdict(v) for k, v in rows.items()}
                for s, rows in stats.by_split.items()
            },
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
        return EXIT_OK
    print("| bucket | N | question | think | answer |")
    print("| --- | --- | --- | --- | --- |")
    for name in ("single", "multi", "total"):
        row = stats.rows[name]
        print(f"| {name} | {row.n} | {row.question:.2f} | {row.think:.2f} | {row.answer:.2f} |")
    for split, rows in stats.by_split.items():
        for name in ("single", "multi", "total"):
            row = rows[name]
            print(
                f"| {split}/{name} | {row.n} | {row.question:.2f} "
                f"| {row.think:.2f} | {row.answer:.2f} |"
            )
    return EXIT_OK


def _load_task(path: str | None) -> tasks.ToyTask:
    return tasks.load_task(path) if path else tasks.bundled_bandit_task()


def _cmd_train_cot(args) -> int:
    task = _load_task(args.task)
    lr = args.lr if args.lr is not None else task.cot_lr
    steps = args.steps if args.steps is not None else task.cot_steps
    logger.info("training supervised stage: lr=%g steps=%d", lr, steps)
    policy = training.train_cot(task.uniform_policy(), task.sft_examples, lr, steps)
    tasks.save_checkpoint(policy, args.out, stage="cot")
    from .grpo import sft_nll_loss

    print(f"final NLL loss: {sft_nll_loss(policy, task.sft_examples):.6f}")
    print(f"checkpoint written to {args.out}")
    return EXIT_OK


def _cmd_train_rft(args) -> int:
    task = _load_task(args.task)
    if args.init:
        policy, stage = tasks.load_checkpoint(args.init)
        if args.require_cot and stage != "cot":
            print(
                f"error: --require-cot is set but {args.init} is a {stage!r} checkpoint; "
                "run `chartkit train cot` first",
                file=sys.stderr,
            )
            return EXIT_USAGE
    elif args.require_cot:
        print(
            "error: --require-cot is set but no --init checkpoint was given; "
            "run `chartkit train cot` first",
            file=sys.stderr,
        )
        return EXIT_USAGE
    else:
        policy = task.uniform_policy()

    grpo_cfg = task.grpo_cfg
    if args.lr is not None:
        grpo_cfg = dataclasses.replace(grpo_cfg, learning_rate=args.lr)
    if args.seed is not None:
        grpo_cfg = dataclasses.replace(grpo_cfg, seed=args.seed)
    logger.info("RL stage: %s steps, cfg=%s", args.steps, grpo_cfg)
    final, trace = training.train_rft(
        policy, task.queries, task.gold, task.reward_cfg, grpo_cfg, steps=args.steps
    )
    tasks.save_checkpoint(final, args.out, stage="rft")
    if args.trace:
        if args.trace_format == "csv":
            trace.write_csv(args.trace)
        else:
            trace.write_jsonl(args.trace)
        print(f"trace written to {args.trace}")
    last = trace[-1]
    norm = task.reward_cfg.w_acc + task.reward_cfg.w_fmt
    print(
        f"final mean reward: {last.mean_total_reward:.4f} "
        f"(normalized {last.mean_total_reward / norm:.4f}), exact KL {last.exact_kl:.6f}"
    )
    print(f"checkpoint written to {args.out}")
    return EXIT_OK


def _cmd_eval_score(args) -> int:
    predictions = evalscore.load_predictions(Path(args.pred))
    gold = pipeline.read_instances_jsonl(Path(args.gold))
    report = evalscore.score_all(predictions, gold, RewardConfig(), threshold=args.threshold)
    text = evalscore.render_report(report, args.format)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def _cmd_check_gradients(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst_sft = worst_grpo = 0.0
    for _ in range(args.instances):
        policy, old, sft, groups, batch = _random_instance(rng)
        report = training.gradient_check(policy, "sft_nll", args.tol, sft_batch=batch)
        worst_sft = max(worst_sft, report.max_rel_error)
        for beta in (0.0, 0.04):
            cfg = GrpoConfig(group_size=4, kl_beta=beta, seed=args.seed)
            report = training.gradient_check(
                policy, "grpo", args.tol, old=old, sft=sft, groups=groups, grpo_cfg=cfg
            )
            worst_grpo = max(worst_grpo, report.max_rel_error)
    passed = worst_sft < args.tol and worst_grpo < args.tol
    print(f"sft_nll max relative error: {worst_sft:.3e}")
    print(f"grpo max relative error:    {worst_grpo:.3e}")
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_RUNTIME


def _random_instance(rng: np.random.Generator, n_queries: int = 3, n_resp: int = 4, g: int = 4):
    from .grpo import SftExample, compute_advantages
    from .policy import RolloutGroup, sample_group

    vocab = {
        f"q{i}": [f"resp-{i}-{j}" for j in range(n_resp)] for i in range(n_queries)
    }
    policy = ToyPolicy(vocab, {q: rng.normal(0, 0.4, n_resp) for q in vocab})
    old = ToyPolicy(vocab, {q: policy.logits[q] + rng.normal(0, 0.05, n_resp) for q in vocab})
    sft = ToyPolicy(vocab, {q: rng.normal(0, 0.4, n_resp) for q in vocab})
    groups = []
    for q in vocab:
        indices, logprobs = sample_group(old, q, g, rng)
        rewards = list(rng.random(g))
        groups.append(
            RolloutGroup(
                query=q,
                responses=indices,
                old_logprobs=logprobs,
                rewards=rewards,
                advantages=list(compute_advantages(rewards)),
            )
        )
    batch = [SftExample(query=q, target=int(rng.integers(n_resp))) for q in vocab]
    return policy, old, sft, groups, batch


_HANDLERS = {
    ("synth", "run"): _cmd_synth_run,
    ("synth", "stats"): _cmd_synth_stats,
    ("train", "cot"): _cmd_train_cot,
    ("train", "rft"): _cmd_train_rft,
    ("eval", "score"): _cmd_eval_score,
    ("check", "gradients"): _cmd_check_gradients,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the tool contract says 1
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = _HANDLERS[(args.command, args.subcommand)]
    try:
        return handler(args)
    except (ConfigError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("runtime failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
