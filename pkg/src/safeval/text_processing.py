"""Answer normalization, token-overlap F1 and answer-span extraction."""

from __future__ import annotations

import re
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

from safeval.errors import BackendError

if TYPE_CHECKING:
    from safeval.backends.base import Annotator

UNANSWERABLE = "<unanswerable>"

SpanKind = Literal["named_entity", "noun"]
SPAN_KINDS: tuple[str, ...] = ("named_entity", "noun")

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")
_ASCII_PUNCT = frozenset(string.punctuation)


@dataclass(frozen=True)
class NormalizedAnswer:
    tokens: tuple[str, ...]
    is_unanswerable: bool = False

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def is_empty(self) -> bool:
        return not self.tokens


@dataclass(frozen=True)
class AnswerSpan:
    """A candidate answer located in a source text by character offsets."""

    text: str
    char_start: int
    char_end: int
    kind: SpanKind

    def __post_init__(self) -> None:
        if self.kind not in SPAN_KINDS:
            raise ValueError(f"unknown span kind {self.kind!r}")
        if not 0 <= self.char_start < self.char_end:
            raise ValueError(f"invalid span offsets [{self.char_start}, {self.char_end})")

    def to_json(self) -> dict:
        return {"text": self.text, "start": self.char_start, "end": self.char_end, "kind": self.kind}

    @classmethod
    def from_json(cls, record: dict) -> "AnswerSpan":
        return cls(str(record["text"]), int(record["start"]), int(record["end"]), record["kind"])


def is_unanswerable(raw: str) -> bool:
    return raw.strip() == UNANSWERABLE


def _is_punct(ch: str) -> bool:
    return ch in _ASCII_PUNCT or unicodedata.category(ch).startswith("P")


def normalize_answer(raw: str) -> NormalizedAnswer:
    """Lowercase, strip punctuation and English articles, split on whitespace.

    This is the SQuAD evaluation convention, extended to drop Unicode
    punctuation as well as ASCII punctuation. The unanswerable sentinel maps
    to an empty, flagged answer.
    """
    if is_unanswerable(raw):
        return NormalizedAnswer((), True)
    text = "".join(ch for ch in raw.lower() if not _is_punct(ch))
    text = _ARTICLES_RE.sub(" ", text)
    return NormalizedAnswer(tuple(text.split()))


def f1_overlap(pred: NormalizedAnswer, gold: NormalizedAnswer) -> float:
    """Bag-of-tokens F1 between a predicted and a ground-truth answer.

    Two unanswerable answers agree (1.0). An unanswerable answer never matches
    an answerable one, and an empty answer only matches another empty one.
    """
    if pred.is_unanswerable or gold.is_unanswerable:
        return 1.0 if pred.is_unanswerable and gold.is_unanswerable else 0.0
    if not pred.tokens or not gold.tokens:
        return 1.0 if not pred.tokens and not gold.tokens else 0.0
    common = Counter(pred.tokens) & Counter(gold.tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred.tokens)
    recall = num_same / len(gold.tokens)
    return (2 * precision * recall) / (precision + recall)


def answer_f1(prediction: str, ground_truth: str) -> float:
    """Convenience wrapper over raw strings."""
    return f1_overlap(normalize_answer(prediction), normalize_answer(ground_truth))


def extract_answer_spans(
    text: str, annotator: "Annotator", *, text_id: str | None = None
) -> list[AnswerSpan]:
    """Named-entity and noun spans of ``text``, one per normalized answer.

    Spans are ordered by first occurrence; when an entity and a noun start at
    the same offset the entity wins. Offsets that do not slice back to the
    span text are treated as an annotator failure.
    """
    if not text:
        return []
    try:
        spans = list(annotator.annotate(text))
    except BackendError as err:
        raise err.with_text_id(text_id) from err
    except Exception as err:  # annotator plug-ins may raise anything
        raise BackendError(f"annotator failed: {err}", kind="annotator", text_id=text_id) from err

    for span in spans:
        if span.char_end > len(text) or text[span.char_start:span.char_end] != span.text:
            raise BackendError(
                f"annotator span {span.text!r} does not match text at "
                f"[{span.char_start}, {span.char_end})",
                kind="annotator",
                text_id=text_id,
            )

    spans.sort(key=lambda s: (s.char_start, SPAN_KINDS.index(s.kind), s.char_end))
    seen: set[tuple[str, ...]] = set()
    out: list[AnswerSpan] = []
    for span in spans:
        key = normalize_answer(span.text).tokens
        if not key or key in seen:
            continue
        seen.add(key)
        out.append(span)
    return out
