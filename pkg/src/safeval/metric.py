"""Precision, recall and the unified SAFEval score."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal

from safeval.backends.base import Backends, QABackend, WeighterBackend, text_hash
from safeval.errors import BackendError, ScoringError
from safeval.question_bank import BankStore, QAPair, QuestionBank
from safeval.text_processing import AnswerSpan, NormalizedAnswer, f1_overlap, normalize_answer

Mode = Literal["uniform", "learned", "precision_only", "recall_only"]
MODES: tuple[str, ...] = ("uniform", "learned", "precision_only", "recall_only")
RecallScoring = Literal["answerability", "f1"]

NO_PRECISION_QUESTIONS = "no_precision_questions"
NO_RECALL_QUESTIONS = "no_recall_questions"
ALL_ZERO_WEIGHTS = "all_zero_weights"


@dataclass(frozen=True)
class Thresholds:
    importance: float = 0.5
    answered: float = 0.5
    hallucination_f1: float = 0.5

    def __post_init__(self) -> None:
        for name in ("importance", "answered", "hallucination_f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"threshold {name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class ScoringConfig:
    beam_size: int = 1
    filter_threshold: float = 1.0
    recall_scoring: RecallScoring = "answerability"
    # weighting used by recall_only; uniform/learned modes imply their own
    recall_weighting: Literal["uniform", "learned"] = "learned"
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if not 0.0 <= self.filter_threshold <= 1.0:
            raise ValueError("filter_threshold must be in [0, 1]")
        if self.recall_scoring not in ("answerability", "f1"):
            raise ValueError(f"unknown recall_scoring {self.recall_scoring!r}")
        if self.recall_weighting not in ("uniform", "learned"):
            raise ValueError(f"unknown recall_weighting {self.recall_weighting!r}")


@dataclass(frozen=True)
class FoldTag:
    important: bool
    answered: bool

    @classmethod
    def of(cls, weight: float, prob_unanswerable: float, thresholds: Thresholds = Thresholds()) -> "FoldTag":
        return cls(weight > thresholds.importance, prob_unanswerable < thresholds.answered)


@dataclass(frozen=True)
class PrecisionRow:
    question: str
    answer: str
    answer_on_document: str
    prob_unanswerable_on_document: float
    f1: float

    def to_json(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "answer_on_document": self.answer_on_document,
            "prob_unanswerable_on_document": self.prob_unanswerable_on_document,
            "f1": self.f1,
        }


@dataclass(frozen=True)
class WeightedQuestion:
    pair: QAPair
    weight: float
    answerability: float
    prob_unanswerable: float
    summary_answer: str
    fold: FoldTag
    term: float

    @property
    def normalized_summary_answer(self) -> NormalizedAnswer:
        return normalize_answer(self.summary_answer)

    def to_json(self) -> dict:
        return {
            "question": self.pair.question,
            "answer": self.pair.raw_answer,
            "weight": self.weight,
            "answerability": self.answerability,
            "prob_unanswerable": self.prob_unanswerable,
            "answer_on_summary": self.summary_answer,
            "term": self.term,
            "important": self.fold.important,
            "answered": self.fold.answered,
            "span": self.pair.source_span.to_json(),
            "beam_rank": self.pair.beam_rank,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WeightedQuestion":
        pair = QAPair(obj["question"], obj["answer"], AnswerSpan.from_json(obj["span"]), int(obj["beam_rank"]))
        return cls(
            pair=pair,
            weight=float(obj["weight"]),
            answerability=float(obj["answerability"]),
            prob_unanswerable=float(obj["prob_unanswerable"]),
            summary_answer=obj["answer_on_summary"],
            fold=FoldTag(bool(obj["important"]), bool(obj["answered"])),
            term=float(obj["term"]),
        )


@dataclass(frozen=True)
class ScoreReport:
    mode: str
    precision: float | None
    recall: float | None
    safeval: float
    precision_rows: tuple[PrecisionRow, ...] = ()
    recall_rows: tuple[WeightedQuestion, ...] = ()
    flags: frozenset[str] = frozenset()

    def to_json(self) -> dict:
        out: dict = {"mode": self.mode}
        if self.precision is not None:
            out["precision"] = self.precision
        if self.recall is not None:
            out["recall"] = self.recall
        out["safeval"] = self.safeval
        out["flags"] = sorted(self.flags)
        if self.precision is not None:
            out["precision_rows"] = [row.to_json() for row in self.precision_rows]
        if self.recall is not None:
            out["recall_rows"] = [row.to_json() for row in self.recall_rows]
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, obj: dict) -> "ScoreReport":
        if obj.get("mode") not in MODES:
            raise ValueError(f"unknown mode {obj.get('mode')!r}")
        return cls(
            mode=obj["mode"],
            precision=obj.get("precision"),
            recall=obj.get("recall"),
            safeval=float(obj["safeval"]),
            precision_rows=tuple(PrecisionRow(**row) for row in obj.get("precision_rows", [])),
            recall_rows=tuple(WeightedQuestion.from_json(row) for row in obj.get("recall_rows", [])),
            flags=frozenset(obj.get("flags", [])),
        )


def harmonic_mean(p: float, r: float) -> float:
    if p + r == 0:
        return 0.0
    if p == r:
        return p
    return 2 * p * r / (p + r)


def _clip(x: float) -> float:
    return min(1.0, max(0.0, x))


def precision(
    document: str, summary: str, summary_bank: QuestionBank, qa: QABackend
) -> tuple[float, list[PrecisionRow], frozenset[str]]:
    """Mean answer-overlap F1 between the document's answers and the summary's spans.

    ``summary_bank`` must have been generated from ``summary``. An empty bank
    scores 0 and is flagged.
    """
    _check_bank(summary_bank, summary, "summary")
    rows = []
    for pair in summary_bank.pairs:
        verdict = qa.qa_answer(document, pair.question)
        f1 = f1_overlap(normalize_answer(verdict.answer_text), pair.answer)
        rows.append(PrecisionRow(pair.question, pair.raw_answer, verdict.answer_text, verdict.prob_unanswerable, f1))
    if not rows:
        return 0.0, rows, frozenset({NO_PRECISION_QUESTIONS})
    return _clip(math.fsum(r.f1 for r in rows) / len(rows)), rows, frozenset()


def recall(
    document: str,
    summary: str,
    document_bank: QuestionBank,
    qa: QABackend,
    weighter: WeighterBackend | None = None,
    mode: Literal["uniform", "learned"] = "learned",
    *,
    scoring: RecallScoring = "answerability",
    thresholds: Thresholds = Thresholds(),
) -> tuple[float, list[WeightedQuestion], frozenset[str]]:
    """Importance-weighted answerability of document questions on the summary.

    In ``uniform`` mode every weight is 1 and the weighter is never called.
    With ``scoring="f1"`` the answerability term is replaced by the answer
    overlap F1 (an ablation).
    """
    _check_bank(document_bank, document, "document")
    if mode not in ("uniform", "learned"):
        raise ValueError(f"recall mode must be uniform or learned, got {mode!r}")
    if mode == "learned" and weighter is None:
        raise ValueError("learned recall needs a weighter")
    rows = []
    for pair in document_bank.pairs:
        weight = 1.0 if mode == "uniform" else float(weighter.weight_query(pair.question, document))
        if not 0.0 <= weight <= 1.0:
            raise BackendError(f"weighter returned out-of-range weight {weight!r}", kind="weighter")
        verdict = qa.qa_answer(summary, pair.question)
        if scoring == "f1":
            term = f1_overlap(normalize_answer(verdict.answer_text), pair.answer)
        else:
            term = verdict.answerability
        rows.append(
            WeightedQuestion(
                pair=pair,
                weight=weight,
                answerability=verdict.answerability,
                prob_unanswerable=verdict.prob_unanswerable,
                summary_answer=verdict.answer_text,
                fold=FoldTag.of(weight, verdict.prob_unanswerable, thresholds),
                term=term,
            )
        )
    if not rows:
        return 0.0, rows, frozenset({NO_RECALL_QUESTIONS})
    total = math.fsum(r.weight for r in rows)
    if total == 0:
        return 0.0, rows, frozenset({ALL_ZERO_WEIGHTS})
    return _clip(math.fsum(r.weight * r.term for r in rows) / total), rows, frozenset()


def _check_bank(bank: QuestionBank, text: str, side: str) -> None:
    if bank.text_hash and bank.text_hash != text_hash(text):
        raise ValueError(f"{side} question bank was not generated from the {side} text")


def safeval_score(
    document: str,
    summary: str,
    backends: Backends,
    mode: Mode = "learned",
    *,
    document_bank: QuestionBank | None = None,
    summary_bank: QuestionBank | None = None,
    config: ScoringConfig = ScoringConfig(),
    store: BankStore | None = None,
) -> ScoreReport:
    """Score ``summary`` against ``document``; banks are built when not given.

    Single-sided modes never touch the other side's backends.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    store = store or BankStore()
    flags: set[str] = set()
    p = r = None
    p_rows: list[PrecisionRow] = []
    r_rows: list[WeightedQuestion] = []

    if mode != "recall_only":
        try:
            if summary_bank is None:
                summary_bank = store.get(summary, backends, config.beam_size, config.filter_threshold)
            p, p_rows, p_flags = precision(document, summary, summary_bank, backends.qa)
        except BackendError as err:
            raise ScoringError("precision", err) from err
        flags |= p_flags

    if mode != "precision_only":
        weighting = mode if mode in ("uniform", "learned") else config.recall_weighting
        try:
            if document_bank is None:
                document_bank = store.get(document, backends, config.beam_size, config.filter_threshold)
            r, r_rows, r_flags = recall(
                document,
                summary,
                document_bank,
                backends.qa,
                backends.weighter,
                weighting,
                scoring=config.recall_scoring,
                thresholds=config.thresholds,
            )
        except BackendError as err:
            raise ScoringError("recall", err) from err
        flags |= r_flags

    if p is not None and r is not None:
        score = harmonic_mean(p, r)
    else:
        score = p if p is not None else r
    return ScoreReport(
        mode=mode,
        precision=p,
        recall=r,
        safeval=score,
        precision_rows=tuple(p_rows),
        recall_rows=tuple(r_rows),
        flags=frozenset(flags),
    )


TriageLabel = Literal["consistent", "hallucinated", "unsupported", "incomplete", "covered", "minor"]


@dataclass(frozen=True)
class TriageRow:
    label: str
    side: str
    question: str
    expected: str
    observed: str
    important: bool
    score: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Explanation:
    verdict: str
    safeval: float
    precision: float | None
    recall: float | None
    rows: tuple[TriageRow, ...]

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "safeval": self.safeval,
            "precision": self.precision,
            "recall": self.recall,
            "rows": [row.to_json() for row in self.rows],
        }

    def render(self) -> str:
        def fmt(x: float | None) -> str:
            return "-" if x is None else f"{x:.3f}"

        lines = [
            f"verdict: {self.verdict}",
            f"safeval {fmt(self.safeval)}  precision {fmt(self.precision)}  recall {fmt(self.recall)}",
        ]
        for row in self.rows:
            star = "*" if row.important else " "
            lines.append(
                f"{star} [{row.label:<12}] {row.question}  expected={row.expected!r} observed={row.observed!r}"
                f" ({row.side}, {row.score:.2f})"
            )
        return "\n".join(lines)


def explain(report: ScoreReport, thresholds: Thresholds = Thresholds()) -> Explanation:
    """Triage every question of a report.

    Precision rows are ``consistent``, ``hallucinated`` (the document answers
    differently) or ``unsupported`` (the document cannot answer). Recall rows
    are ``incomplete`` (important but unanswered by the summary), ``covered``
    or ``minor``. The overall verdict is the worst label found, in the order
    hallucinated, unsupported, incomplete, consistent.
    """
    rows: list[TriageRow] = []
    for row in report.precision_rows:
        on_doc = normalize_answer(row.answer_on_document)
        if row.f1 >= thresholds.hallucination_f1:
            label = "consistent"
        elif on_doc.is_unanswerable:
            label = "unsupported"
        else:
            label = "hallucinated"
        rows.append(TriageRow(label, "precision", row.question, row.answer, row.answer_on_document, False, row.f1))
    for wq in report.recall_rows:
        important = wq.weight > thresholds.importance
        answered = wq.prob_unanswerable < thresholds.answered
        if important and not answered:
            label = "incomplete"
        elif important:
            label = "covered"
        else:
            label = "minor"
        rows.append(
            TriageRow(label, "recall", wq.pair.question, wq.pair.raw_answer, wq.summary_answer, important, wq.weight)
        )
    # important first, then problems before passes, stable otherwise
    severity = {"hallucinated": 0, "unsupported": 1, "incomplete": 2, "consistent": 3, "covered": 4, "minor": 5}
    rows.sort(key=lambda r: (not r.important, severity[r.label]))
    labels = {r.label for r in rows}
    for verdict in ("hallucinated", "unsupported", "incomplete"):
        if verdict in labels:
            break
    else:
        verdict = "consistent"
    return Explanation(verdict, report.safeval, report.precision, report.recall, tuple(rows))
