"""Programmatic chart-QA synthesis: prompts, candidates, validation, stats.

The generation chain is: table + seed code -> plotting-code prompt -> code
candidate -> rendered image -> instance prompt -> question/think/answer ->
format-validated instance.  Everything downstream of the LLM client and the
executor is deterministic.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from PIL import Image, UnidentifiedImageError

from . import rewards
from .llm import LlmClient
from .rewards import AnswerKind, FormatError, GoldAnswer

DEFAULT_SFT_FRACTION = 228 / 258  # headline corpus split, scaled down

SUBPLOT_INSTRUCTION = (
    "Build a composite figure with multiple sub-plots using plt.subplots()."
)
CROSS_REF_INSTRUCTION = (
    "The question must require combining information across different sub-charts; "
    "it may not be answerable from any single sub-chart alone."
)


class Arity(Enum):
    SINGLE = "single"
    MULTI = "multi"


class Split(Enum):
    SFT = "sft"
    RL = "rl"
    UNASSIGNED = "unassigned"


class CandidateStatus(Enum):
    PENDING = "pending"
    RENDERED = "rendered"
    FAILED = "failed"


class NoCodeBlock(ValueError):
    pass


class MalformedCompletion(ValueError):
    pass


class ValidationCategory(Enum):
    BAD_FORMAT = "BadFormat"
    BAD_IMAGE = "BadImage"
    EMPTY_FIELD = "EmptyField"


class ValidationError(ValueError):
    def __init__(self, category: ValidationCategory, detail: str = ""):
        self.category = category
        super().__init__(f"{category.value}: {detail}" if detail else category.value)


@dataclass(frozen=True)
class TableSource:
    id: str
    caption: str
    cells: list[list[str]]
    origin: str = ""

    def __post_init__(self):
        if len(self.cells) < 2 or any(len(row) < 2 for row in self.cells):
            raise ValueError(f"table {self.id!r} must be at least 2x2")
        widths = {len(row) for row in self.cells}
        if len(widths) != 1:
            raise ValueError(f"table {self.id!r} has ragged rows")


@dataclass(frozen=True)
class SeedCode:
    id: str
    chart_type: str
    arity: Arity
    code: str


@dataclass
class CodeCandidate:
    code: str
    chart_type: str
    arity: Arity
    table_id: str
    seed_id: str
    status: CandidateStatus = CandidateStatus.PENDING
    image_ref: Path | None = None
    fail_reason: str = ""
    prompt: str = ""
    completion: str = ""

    @property
    def candidate_id(self) -> str:
        return f"{self.table_id}__{self.seed_id}"


@dataclass(frozen=True)
class RawInstance:
    question: str
    think: str
    answer: str
    candidate: CodeCandidate


@dataclass
class ReasoningInstance:
    id: str
    image_ref: Path
    code: str
    question: str
    think: str
    answer: GoldAnswer
    arity: Arity
    chart_type: str
    split: Split = Split.UNASSIGNED

    def serialized_response(self) -> str:
        return f"<think>{self.think}</think><answer>{self.answer.raw}</answer>"


def render_table(table: TableSource) -> str:
    """Column-aligned plain-text rendering, every cell verbatim."""
    widths = [
        max(len(row[c]) for row in table.cells) for c in range(len(table.cells[0]))
    ]
    lines = [
        " | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        for row in table.cells
    ]
    return "\n".join(lines)


def compose_code_prompt(table: TableSource, seed: SeedCode, arity: Arity) -> str:
    """Prompt for plotting-code generation from a table and a seed example."""
    if seed.arity is not arity:
        raise ValueError(
            f"seed {seed.id!r} has arity {seed.arity.value}, requested {arity.value}"
        )
    parts = [
        "You are given a data table and an example Matplotlib script.",
        f"Write a new Matplotlib script that plots the table below as a {seed.chart_type} chart.",
        "Respond with a single fenced Python code block.",
        "",
        f"Table caption: {table.caption}",
        "Table data:",
        render_table(table),
        "",
        "Example script:",
        "```python",
        seed.code.rstrip("\n"),
        "```",
    ]
    if arity is Arity.MULTI:
        parts.append("")
        parts.append(SUBPLOT_INSTRUCTION)
    return "\n".join(parts)


_FENCE_RE = re.compile(r"```(?:[A-Za-z0-9_+-]*)\n(.*?)```", re.DOTALL)


def extract_code_block(completion: str) -> str:
    m = _FENCE_RE.search(completion)
    if m is None:
        raise NoCodeBlock("completion contains no fenced code block")
    return m.group(1)


def generate_plot_code(
    client: LlmClient, prompt: str, *, table: TableSource, seed: SeedCode
) -> CodeCandidate:
    """Run the code-generation prompt and wrap the extracted block."""
    completion = client.complete(prompt)
    code = extract_code_block(completion)
    return CodeCandidate(
        code=code,
        chart_type=seed.chart_type,
        arity=seed.arity,
        table_id=table.id,
        seed_id=seed.id,
        prompt=prompt,
        completion=completion,
    )


def execute_candidates(
    executor,
    candidates: list[CodeCandidate],
    timeout_s: float,
    image_dir: Path,
) -> list[CodeCandidate]:
    """Run each pending candidate once; mark Rendered or Failed in place."""
    image_dir = Path(image_dir)
    image_dir.mkdir(parents=True, exist_ok=True)
    for candidate in candidates:
        if candidate.status is not CandidateStatus.PENDING:
            continue
        output = image_dir / f"{candidate.candidate_id}.png"
        outcome = executor.run(candidate.code, timeout_s, output)
        if outcome.ok:
            candidate.status = CandidateStatus.RENDERED
            candidate.image_ref = output
        else:
            candidate.status = CandidateStatus.FAILED
            candidate.fail_reason = outcome.error
    return candidates


def compose_instance_prompt(candidate: CodeCandidate) -> str:
    """Arity-specific prompt asking for a labeled question/think/answer triple."""
    parts = [
        "Below is the Matplotlib code for a rendered chart.",
        "Write one challenging question about the chart, a step-by-step reasoning",
        "process that answers it, and the final answer.",
        "Respond with exactly three labeled sections:",
        "QUESTION: <the question>",
        "THINK: <the step-by-step reasoning>",
        "ANSWER: <the final answer only>",
        "",
    ]
    if candidate.arity is Arity.MULTI:
        parts.append(CROSS_REF_INSTRUCTION)
        parts.append("")
    parts.append("```python")
    parts.append(candidate.code.rstrip("\n"))
    parts.append("```")
    return "\n".join(parts)


_SECTION_RE = re.compile(
    r"QUESTION:\s*(?P<question>.*?)\s*^THINK:\s*(?P<think>.*?)\s*^ANSWER:\s*(?P<answer>.*?)\s*\Z",
    re.DOTALL | re.MULTILINE,
)


def generate_instance(client: LlmClient, candidate: CodeCandidate) -> RawInstance:
    if candidate.status is not CandidateStatus.RENDERED:
        raise ValueError("instance generation requires a rendered candidate")
    prompt = compose_instance_prompt(candidate)
    completion = client.complete(prompt)
    m = _SECTION_RE.search(completion)
    if m is None:
        raise MalformedCompletion("completion lacks QUESTION/THINK/ANSWER sections")
    return RawInstance(
        question=m.group("question").strip(),
        think=m.group("think").strip(),
        answer=m.group("answer").strip(),
        candidate=candidate,
    )


def validate_instance(raw: RawInstance) -> ReasoningInstance:
    """Accept a raw instance iff it round-trips the reward grammar and image."""
    for name, value in (("question", raw.question), ("think", raw.think), ("answer", raw.answer)):
        if not value.strip():
            raise ValidationError(ValidationCategory.EMPTY_FIELD, f"empty {name}")
    serialized = f"<think>{raw.think}</think><answer>{raw.answer}</answer>"
    try:
        rewards.parse_response(serialized)
    except FormatError as exc:
        raise ValidationError(ValidationCategory.BAD_FORMAT, str(exc)) from exc
    candidate = raw.candidate
    if candidate.image_ref is None:
        raise ValidationError(ValidationCategory.BAD_IMAGE, "no rendered image")
    try:
        with Image.open(candidate.image_ref) as img:
            img.verify()
    except (OSError, UnidentifiedImageError) as exc:
        raise ValidationError(ValidationCategory.BAD_IMAGE, str(exc)) from exc
    return ReasoningInstance(
        id=candidate.candidate_id,
        image_ref=candidate.image_ref,
        code=candidate.code,
        question=raw.question,
        think=raw.think,
        answer=GoldAnswer.from_raw(raw.answer),
        arity=candidate.arity,
        chart_type=candidate.chart_type,
    )


def split_dataset(
    instances: list[ReasoningInstance],
    sft_fraction: float = DEFAULT_SFT_FRACTION,
    seed: int = 0,
) -> tuple[list[ReasoningInstance], list[ReasoningInstance]]:
    """Uniform random disjoint partition; sets the split field in place."""
    if not 0 < sft_fraction < 1:
        raise ValueError("sft_fraction must be in (0, 1)")
    order = list(range(len(instances)))
    random.Random(seed).shuffle(order)
    n_sft = round(sft_fraction * len(instances))
    sft_indices = set(order[:n_sft])
    sft, rl = [], []
    for i, inst in enumerate(instances):
        if i in sft_indices:
            inst.split = Split.SFT
            sft.append(inst)
        else:
            inst.split = Split.RL
            rl.append(inst)
    return sft, rl


@dataclass(frozen=True)
class StatsRow:
    n: int
    question: float
    think: float
    answer: float


@dataclass(frozen=True)
class StatsTable:
    """Mean token counts by arity, overall and per split."""

    rows: dict[str, StatsRow]
    by_split: dict[str, dict[str, StatsRow]]
    empty: bool = False


def whitespace_tokenizer(text: str) -> list[str]:
    return text.split()


def _stats_rows(
    instances: list[ReasoningInstance], tokenizer: Callable[[str], list[str]]
) -> dict[str, StatsRow]:
    buckets: dict[str, list[ReasoningInstance]] = {"single": [], "multi": []}
    for inst in instances:
        buckets[inst.arity.value].append(inst)
    buckets["total"] = list(instances)
    rows = {}
    for name, items in buckets.items():
        if not items:
            rows[name] = StatsRow(n=0, question=0.0, think=0.0, answer=0.0)
            continue
        rows[name] = StatsRow(
            n=len(items),
            question=sum(len(tokenizer(i.question)) for i in items) / len(items),
            think=sum(len(tokenizer(i.think)) for i in items) / len(items),
            answer=sum(len(tokenizer(i.answer.raw)) for i in items) / len(items),
        )
    return rows


def compute_stats(
    instances: list[ReasoningInstance],
    tokenizer: Callable[[str], list[str]] = whitespace_tokenizer,
) -> StatsTable:
    """Mean question/think/answer token counts by arity and by split."""
    by_split = {}
    for split in (Split.SFT, Split.RL):
        members = [i for i in instances if i.split is split]
        if members:
            by_split[split.value] = _stats_rows(members, tokenizer)
    return StatsTable(
        rows=_stats_rows(instances, tokenizer),
        by_split=by_split,
        empty=not instances,
    )
