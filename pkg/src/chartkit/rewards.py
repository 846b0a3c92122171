"""Rule-based rewards for chart question answering.

A model output is well-formed when it consists of exactly one
``<think>...</think>`` block followed by exactly one ``<answer>...</answer>``
block, with nothing but whitespace around them.  Accuracy is scored from the
answer span: numeric answers get a binary soft match with a relative
tolerance, string answers get a normalized edit-distance score in [0, 1].
All functions here are pure and thread-safe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class FormatViolation(Enum):
    MISSING_THINK = "MissingThink"
    MISSING_ANSWER = "MissingAnswer"
    DUPLICATE_TAG = "DuplicateTag"
    EXTRA_CONTENT = "ExtraContent"
    EMPTY_SPAN = "EmptySpan"


class FormatError(ValueError):
    """Raised when a model output does not match the think/answer grammar."""

    def __init__(self, violation: FormatViolation, detail: str = ""):
        self.violation = violation
        msg = violation.value if not detail else f"{violation.value}: {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class ParsedResponse:
    think: str
    answer: str


class AnswerKind(Enum):
    NUMERIC = "numeric"
    TEXT = "text"


@dataclass(frozen=True)
class GoldAnswer:
    raw: str
    kind: AnswerKind

    @classmethod
    def from_raw(cls, raw: str) -> "GoldAnswer":
        """Classify a gold answer: numeric iff it canonicalizes to a number."""
        kind = AnswerKind.NUMERIC if parse_number(raw) is not None else AnswerKind.TEXT
        return cls(raw=raw, kind=kind)

    @property
    def value(self) -> float:
        v = parse_number(self.raw)
        if v is None:
            raise ValueError(f"gold answer {self.raw!r} is not numeric")
        return v


@dataclass(frozen=True)
class RewardConfig:
    rel_tol: float = 0.05
    w_acc: float = 1.0
    w_fmt: float = 1.0
    case_insensitive: bool = True
    enforce_tag_order: bool = True

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.w_acc < 0 or self.w_fmt < 0:
            raise ValueError("reward weights must be nonnegative")


@dataclass(frozen=True)
class RewardBreakdown:
    format: float
    accuracy: float
    total: float
    parse_ok: bool


_THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL)
_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
_FULL_RE = re.compile(
    r"\s*<think>(.*?)</think>\s*<answer>(.*?)</answer>\s*\Z", re.DOTALL
)
_FULL_RE_REVERSED = re.compile(
    r"\s*<answer>(.*?)</answer>\s*<think>(.*?)</think>\s*\Z", re.DOTALL
)

# Decorations commonly found on chart answers; stripped before numeric parse.
_CURRENCY = "$€£¥"
_NUMBER_RE = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?\Z")


def parse_response(text: str, enforce_order: bool = True) -> ParsedResponse:
    """Extract the think/answer spans, or raise FormatError.

    The full text must be: optional whitespace, one think block, optional
    whitespace, one answer block, optional trailing whitespace.  Repeated or
    nested tags, content outside the blocks, or empty spans are rejected.
    With enforce_order=False the answer block may precede the think block.
    """
    for tag in ("<think>", "</think>"):
        n = text.count(tag)
        if n == 0:
            raise FormatError(FormatViolation.MISSING_THINK, f"missing {tag}")
        if n > 1:
            raise FormatError(FormatViolation.DUPLICATE_TAG, f"repeated {tag}")
    for tag in ("<answer>", "</answer>"):
        n = text.count(tag)
        if n == 0:
            raise FormatError(FormatViolation.MISSING_ANSWER, f"missing {tag}")
        if n > 1:
            raise FormatError(FormatViolation.DUPLICATE_TAG, f"repeated {tag}")

    m = _FULL_RE.fullmatch(text)
    if m is not None:
        think, answer = m.group(1), m.group(2)
    elif not enforce_order and (m := _FULL_RE_REVERSED.fullmatch(text)) is not None:
        answer, think = m.group(1), m.group(2)
    else:
        raise FormatError(
            FormatViolation.EXTRA_CONTENT,
            "content outside tags or tags out of order",
        )

    think, answer = think.strip(), answer.strip()
    if not think:
        raise FormatError(FormatViolation.EMPTY_SPAN, "empty think span")
    if not answer:
        raise FormatError(FormatViolation.EMPTY_SPAN, "empty answer span")
    return ParsedResponse(think=think, answer=answer)


def format_reward(text: str, enforce_order: bool = True) -> float:
    try:
        parse_response(text, enforce_order=enforce_order)
    except FormatError:
        return 0.0
    return 1.0


def parse_number(text: str) -> float | None:
    """Parse a decorated numeric answer, or return None.

    Strips surrounding whitespace, thousands-separator commas, one leading
    currency symbol, and one trailing percent sign.
    """
    s = text.strip()
    if not s:
        return None
    if s[0] in _CURRENCY:
        s = s[1:].lstrip()
    if s.endswith("%"):
        s = s[:-1].rstrip()
    s = s.replace(",", "")
    if not _NUMBER_RE.fullmatch(s):
        return None
    try:
        return float(s)
    except ValueError:
        return None


def numeric_reward(pred: str, gold_value: float, rel_tol: float) -> float:
    """Binary soft match: 1 iff pred is within rel_tol of gold (inclusive)."""
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    p = parse_number(pred)
    if p is None:
        return 0.0
    if gold_value == 0.0:
        # Relative tolerance is degenerate at zero; fall back to absolute.
        return 1.0 if abs(p) <= 1e-9 else 0.0
    return 1.0 if abs(p - gold_value) <= rel_tol * abs(gold_value) else 0.0


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance, two-row DP."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


def _canon_text(s: str, case_insensitive: bool) -> str:
    s = s.strip()
    return s.lower() if case_insensitive else s


def string_reward(pred: str, gold: str, case_insensitive: bool = True) -> float:
    """1 - normalized edit distance, clamped to [0, 1]."""
    a = _canon_text(pred, case_insensitive)
    b = _canon_text(gold, case_insensitive)
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    score = 1.0 - levenshtein(a, b) / longest
    return min(1.0, max(0.0, score))


def accuracy_reward(response: str, gold: GoldAnswer, cfg: RewardConfig) -> float:
    """Score the answer span of a well-formed response; 0 if unparseable."""
    try:
        parsed = parse_response(response, enforce_order=cfg.enforce_tag_order)
    except FormatError:
        return 0.0
    if gold.kind is AnswerKind.NUMERIC:
        return numeric_reward(parsed.answer, gold.value, cfg.rel_tol)
    return string_reward(parsed.answer, gold.raw, cfg.case_insensitive)


def total_reward(response: str, gold: GoldAnswer, cfg: RewardConfig) -> RewardBreakdown:
    fmt = format_reward(response, enforce_order=cfg.enforce_tag_order)
    acc = accuracy_reward(response, gold, cfg) if fmt == 1.0 else 0.0
    return RewardBreakdown(
        format=fmt,
        accuracy=acc,
        total=cfg.w_acc * acc + cfg.w_fmt * fmt,
        parse_ok=fmt == 1.0,
    )
