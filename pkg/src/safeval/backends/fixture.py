"""Deterministic fixture backend read from a JSON-lines file.

Each line is one record. ``text`` records register a reusable text under an
id; the other kinds are keyed by the content hash of their context::

    {"kind": "text", "id": "doc", "text": "..."}
    {"kind": "qa", "context_id": "doc", "question": "...", "answer": "...", "prob_unanswerable": 0.02}
    {"kind": "qg", "context_id": "doc", "answer": "...", "questions": ["...", "..."]}
    {"kind": "weighter", "context_id": "doc", "question": "...", "weight": 0.9}
    {"kind": "annotate", "context_id": "doc", "spans": [{"text": "...", "start": 0, "end": 5, "kind": "noun"}]}

The context may be given inline (``context``), by id (``context_id``) or by
hash (``context_sha256``). For ``weighter`` records the context is the source
document.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

from safeval.backends.base import (
    FIXTURE_MISS_VERDICT,
    QAVerdict,
    QGCandidates,
    text_hash,
)
from safeval.errors import BackendError, FormatError
from safeval.text_processing import AnswerSpan

logger = logging.getLogger(__name__)

_RECORD_KINDS = ("text", "qa", "qg", "weighter", "annotate")


class FixtureBackend:
    """Serves QA, QG, weighter and annotation responses from fixture records.

    Lookups never fail: a QA miss returns an unanswerable verdict with
    probability 1.0, a weighter miss returns 1.0 and a QG miss returns no
    questions, each flagged and counted in ``misses``. An annotation miss is
    an error because silently producing no answer spans would hide it.
    """

    def __init__(self, records: Iterable[dict], *, name: str = "<memory>", fingerprint: str | None = None):
        self.name = name
        self._qa: dict[tuple[str, str], QAVerdict] = {}
        self._qg: dict[tuple[str, str], tuple[str, ...]] = {}
        self._weights: dict[tuple[str, str], float] = {}
        self._spans: dict[str, tuple[AnswerSpan, ...]] = {}
        self._texts: dict[str, str] = {}
        self.misses: Counter[str] = Counter()
        self._lock = threading.Lock()

        records = list(records)
        for lineno, record in enumerate(records, start=1):
            try:
                self._add(record)
            except FormatError:
                raise
            except (KeyError, TypeError, ValueError) as err:
                raise FormatError(f"bad fixture record: {err!r}", path=name, line=lineno) from err
        if fingerprint is None:
            canonical = json.dumps(records, sort_keys=True, ensure_ascii=False)
            fingerprint = "fixture:" + text_hash(canonical)[:16]
        self.fingerprint = fingerprint

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureBackend":
        path = Path(path)
        raw = path.read_bytes()
        records = []
        for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as err:
                raise FormatError(f"invalid JSON: {err.msg}", path=str(path), line=lineno) from err
        return cls(records, name=str(path), fingerprint="fixture:" + _bytes_hash(raw))

    def _context_key(self, record: dict) -> str:
        if "context" in record:
            return text_hash(record["context"])
        if "context_id" in record:
            cid = record["context_id"]
            if cid not in self._texts:
                raise FormatError(f"unknown context_id {cid!r} (text records must come first)", path=self.name)
            return text_hash(self._texts[cid])
        return str(record["context_sha256"])

    def _add(self, record: dict) -> None:
        kind = record["kind"]
        if kind not in _RECORD_KINDS:
            raise ValueError(f"unknown record kind {kind!r}")
        if kind == "text":
            self._texts[record["id"]] = record["text"]
            return
        ctx = self._context_key(record)
        if kind == "qa":
            key = (ctx, record["question"])
            verdict = QAVerdict(str(record["answer"]), float(record["prob_unanswerable"]))
            if verdict.unanswerable and verdict.prob_unanswerable < 0.5:
                raise ValueError("unanswerable fixture verdict needs prob_unanswerable >= 0.5")
            _put(self._qa, key, verdict)
        elif kind == "qg":
            questions = tuple(record["questions"])
            if not questions or len(set(questions)) != len(questions):
                raise ValueError("qg record needs distinct, non-empty questions")
            _put(self._qg, (ctx, record["answer"]), questions)
        elif kind == "weighter":
            weight = float(record["weight"])
            if not 0.0 <= weight <= 1.0:
                raise ValueError(f"weight out of range: {weight}")
            _put(self._weights, (ctx, record["question"]), weight)
        else:
            spans = tuple(AnswerSpan.from_json(s) for s in record["spans"])
            _put(self._spans, ctx, spans)

    def _miss(self, kind: str) -> None:
        with self._lock:
            self.misses[kind] += 1

    def qa_answer(self, context: str, question: str) -> QAVerdict:
        verdict = self._qa.get((text_hash(context), question))
        if verdict is None:
            self._miss("qa")
            return FIXTURE_MISS_VERDICT
        return verdict

    def qg_generate(self, context: str, answer: AnswerSpan, beam_size: int) -> QGCandidates:
        if beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        questions = self._qg.get((text_hash(context), answer.text))
        if questions is None:
            self._miss("qg")
            return QGCandidates((), beam_size, fixture_miss=True)
        return QGCandidates(questions[:beam_size], beam_size)

    def weight_query(self, question: str, document: str) -> float:
        weight = self._weights.get((text_hash(document), question))
        if weight is None:
            self._miss("weighter")
            return 1.0
        return weight

    def annotate(self, text: str) -> Sequence[AnswerSpan]:
        spans = self._spans.get(text_hash(text))
        if spans is None:
            self._miss("annotator")
            raise BackendError("no fixture annotation for text", kind="annotator")
        return list(spans)

    def text(self, text_id: str) -> str:
        """Look up a text registered by a ``text`` record."""
        return self._texts[text_id]

    @property
    def text_ids(self) -> list[str]:
        return list(self._texts)


def _put(table: dict, key, value) -> None:
    if key in table:
        raise ValueError(f"duplicate fixture key {key!r}")
    table[key] = value


def _bytes_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()[:16]
