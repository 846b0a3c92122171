"""Relaxed-accuracy scoring of prediction files against gold instances.

A prediction is correct when its accuracy reward reaches the threshold
(default 1.0, i.e. numeric within tolerance / exact canonical string
match).  Results are bucketed by arity and by answer kind.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .rewards import RewardConfig, accuracy_reward, format_reward, GoldAnswer, AnswerKind


class UnknownId(KeyError):
    pass


class DuplicateId(ValueError):
    pass


class EmptyGold(ValueError):
    pass


@dataclass(frozen=True)
class Prediction:
    id: str
    output: str


@dataclass(frozen=True)
class Bucket:
    n: int
    correct: int

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.n if self.n else 0.0


@dataclass(frozen=True)
class EvalReport:
    overall: Bucket
    by_arity: dict[str, Bucket]
    by_kind: dict[str, Bucket]
    format_rate: float
    threshold: float = 1.0


def load_predictions(path) -> list[Prediction]:
    preds = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                preds.append(Prediction(id=obj["id"], output=obj["output"]))
    return preds


def score_all(
    predictions: list[Prediction],
    gold_instances: list[dict],
    cfg: RewardConfig | None = None,
    threshold: float = 1.0,
) -> EvalReport:
    """Score predictions against gold records (instance JSONL dicts)."""
    cfg = cfg or RewardConfig()
    if not gold_instances:
        raise EmptyGold("no gold instances")
    gold_by_id: dict[str, dict] = {}
    for record in gold_instances:
        if record["id"] in gold_by_id:
            raise DuplicateId(f"duplicate gold id {record['id']!r}")
        gold_by_id[record["id"]] = record

    seen: set[str] = set()
    arity_tally: dict[str, list[int]] = {"single": [0, 0], "multi": [0, 0]}
    kind_tally: dict[str, list[int]] = {"numeric": [0, 0], "text": [0, 0]}
    total_n = total_correct = format_ok = 0
    for pred in predictions:
        if pred.id in seen:
            raise DuplicateId(f"duplicate prediction id {pred.id!r}")
        seen.add(pred.id)
        record = gold_by_id.get(pred.id)
        if record is None:
            raise UnknownId(f"prediction id {pred.id!r} has no gold instance")
        kind = AnswerKind(record["answer_kind"])
        gold = GoldAnswer(raw=record["answer"], kind=kind)
        score = accuracy_reward(pred.output, gold, cfg)
        correct = int(score >= threshold)
        total_n += 1
        total_correct += correct
        format_ok += int(format_reward(pred.output, cfg.enforce_tag_order) == 1.0)
        arity_tally.setdefault(record["arity"], [0, 0])
        arity_tally[record["arity"]][0] += 1
        arity_tally[record["arity"]][1] += correct
        kind_tally.setdefault(kind.value, [0, 0])
        kind_tally[kind.value][0] += 1
        kind_tally[kind.value][1] += correct

    return EvalReport(
        overall=Bucket(n=total_n, correct=total_correct),
        by_arity={k: Bucket(n=v[0], correct=v[1]) for k, v in sorted(arity_tally.items())},
        by_kind={k: Bucket(n=v[0], correct=v[1]) for k, v in sorted(kind_tally.items())},
        format_rate=100.0 * format_ok / total_n if total_n else 0.0,
        threshold=threshold,
    )


def _report_dict(report: EvalReport) -> dict:
    def bucket(b: Bucket) -> dict:
        return {"accuracy": round(b.accuracy, 4), "correct": b.correct, "n": b.n}

    return {
        "by_arity": {k: bucket(v) for k, v in sorted(report.by_arity.items())},
        "by_kind": {k: bucket(v) for k, v in sorted(report.by_kind.items())},
        "format_rate": round(report.format_rate, 4),
        "overall": bucket(report.overall),
        "threshold": report.threshold,
    }


def render_report(report: EvalReport, fmt: str = "markdown") -> str:
    if fmt == "json":
        return json.dumps(_report_dict(report), indent=2, sort_keys=True)
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")

    rows = [("overall", report.overall)]
    rows += [(f"arity:{k}", v) for k, v in sorted(report.by_arity.items())]
    rows += [(f"kind:{k}", v) for k, v in sorted(report.by_kind.items())]
    lines = ["| bucket | N | accuracy |", "| --- | --- | --- |"]
    omitted = []
    for name, b in rows:
        if b.n == 0:
            omitted.append(name)
            continue
        lines.append(f"| {name} | {b.n} | {b.accuracy:.2f} |")
    lines.append(f"| format-compliance | {report.overall.n} | {report.format_rate:.2f} |")
    for name in omitted:
        lines.append(f"_bucket {name} omitted: no samples_")
    return "\n".join(lines)
