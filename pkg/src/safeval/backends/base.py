"""Backend contracts for the QA, QG, weighter and annotation components."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Literal, Protocol, Sequence, runtime_checkable

from safeval.text_processing import UNANSWERABLE, AnswerSpan, is_unanswerable

BackendKind = Literal["qa", "qg", "weighter", "annotator"]
BACKEND_KINDS: tuple[str, ...] = ("qa", "qg", "weighter", "annotator")
IMPLEMENTATIONS: tuple[str, ...] = ("fixture", "remote", "uniform", "model")


def text_hash(text: str) -> str:
    """Stable content hash used to key fixtures, caches and banks."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class QAVerdict:
    answer_text: str
    prob_unanswerable: float
    fixture_miss: bool = False

    def __post_init__(self) -> None:
        p = self.prob_unanswerable
        if not (isinstance(p, (int, float)) and math.isfinite(p) and 0.0 <= p <= 1.0):
            raise ValueError(f"prob_unanswerable out of range: {p!r}")

    @property
    def unanswerable(self) -> bool:
        return is_unanswerable(self.answer_text)

    @property
    def answerability(self) -> float:
        return 1.0 - self.prob_unanswerable


FIXTURE_MISS_VERDICT = QAVerdict(UNANSWERABLE, 1.0, fixture_miss=True)


@dataclass(frozen=True)
class QGCandidates:
    questions: tuple[str, ...]
    beam_size: int
    fixture_miss: bool = False

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if len(self.questions) > self.beam_size:
            raise ValueError("more questions than beams")
        if len(set(self.questions)) != len(self.questions):
            raise ValueError("duplicate questions in beam output")
        if not self.questions and not self.fixture_miss:
            raise ValueError("a QG backend must return at least one question")


@dataclass(frozen=True)
class BackendDescriptor:
    """Where a backend of a given kind comes from.

    ``fixture`` and ``model`` read a local file, ``remote`` talks to an HTTP
    endpoint, ``uniform`` is the constant weighter and needs neither.
    """

    kind: str
    implementation: str
    endpoint: str | None = None
    fixture_path: str | None = None
    options: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.implementation not in IMPLEMENTATIONS:
            raise ValueError(f"unknown backend implementation {self.implementation!r}")
        if self.implementation == "remote" and not self.endpoint:
            raise ValueError(f"remote {self.kind} backend requires an endpoint")
        if self.implementation in ("fixture", "model") and not self.fixture_path:
            raise ValueError(f"{self.implementation} {self.kind} backend requires a file path")
        if self.implementation in ("uniform", "model") and self.kind != "weighter":
            raise ValueError(f"{self.implementation!r} is only valid for the weighter")


@runtime_checkable
class QABackend(Protocol):
    fingerprint: str

    def qa_answer(self, context: str, question: str) -> QAVerdict: ...


@runtime_checkable
class QGBackend(Protocol):
    fingerprint: str

    def qg_generate(self, context: str, answer: AnswerSpan, beam_size: int) -> QGCandidates: ...


@runtime_checkable
class WeighterBackend(Protocol):
    fingerprint: str

    def weight_query(self, question: str, document: str) -> float: ...


@runtime_checkable
class Annotator(Protocol):
    fingerprint: str

    def annotate(self, text: str) -> Sequence[AnswerSpan]: ...


class UniformWeighter:
    """Every question is equally important."""

    fingerprint = "uniform"

    def weight_query(self, question: str, document: str) -> float:
        return 1.0


@dataclass
class Backends:
    qa: QABackend
    qg: QGBackend
    annotator: Annotator
    weighter: WeighterBackend = field(default_factory=UniformWeighter)

    @property
    def bank_fingerprint(self) -> str:
        # question banks depend on QG, QA (filter) and annotation only
        return text_hash("|".join([self.qg.fingerprint, self.qa.fingerprint, self.annotator.fingerprint]))[:16]

    @property
    def fingerprint(self) -> str:
        parts = [self.qg.fingerprint, self.qa.fingerprint, self.annotator.fingerprint, self.weighter.fingerprint]
        return text_hash("|".join(parts))[:16]
