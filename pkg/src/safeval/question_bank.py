"""Filtered question-answer sets generated from a text."""

from __future__ import annotations

import json
import logging
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from safeval.backends.base import Backends, text_hash
from safeval.errors import BackendError, FormatError
from safeval.text_processing import (
    AnswerSpan,
    NormalizedAnswer,
    extract_answer_spans,
    f1_overlap,
    normalize_answer,
)

logger = logging.getLogger(__name__)

BANK_FORMAT_VERSION = 1


@dataclass(frozen=True)
class QAPair:
    question: str
    raw_answer: str
    source_span: AnswerSpan
    beam_rank: int

    def __post_init__(self) -> None:
        if self.beam_rank < 1:
            raise ValueError("beam_rank must be >= 1")
        if self.answer.is_unanswerable or self.answer.is_empty:
            raise ValueError(f"QA pair needs a real answer, got {self.raw_answer!r}")

    @property
    def answer(self) -> NormalizedAnswer:
        return normalize_answer(self.raw_answer)


@dataclass(frozen=True)
class FilterStats:
    spans: int = 0
    generated: int = 0
    filtered: int = 0
    duplicates: int = 0
    retained: int = 0


@dataclass(frozen=True)
class QuestionBank:
    text_id: str
    text_hash: str
    pairs: tuple[QAPair, ...]
    beam_size: int
    filter_threshold: float = 1.0
    backend_fingerprint: str = ""
    filter_stats: FilterStats = field(default_factory=FilterStats)

    @property
    def is_empty(self) -> bool:
        return not self.pairs

    def __len__(self) -> int:
        return len(self.pairs)


def build_question_bank(
    text: str,
    backends: Backends,
    beam_size: int = 1,
    *,
    filter_threshold: float = 1.0,
    text_id: str | None = None,
    workers: int = 1,
) -> QuestionBank:
    """Generate questions for every answer span and keep those the QA model
    answers correctly on ``text``.

    A candidate ``(q, r)`` survives when the overlap F1 between
    ``qa_answer(text, q)`` and ``r`` reaches ``filter_threshold`` (1.0 means
    normalized exact match). Every surviving beam is kept. A question produced
    for several spans is kept once, at its best beam rank.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    if not 0.0 <= filter_threshold <= 1.0:
        raise ValueError("filter_threshold must be in [0, 1]")
    digest = text_hash(text)
    text_id = text_id or digest[:16]
    spans = extract_answer_spans(text, backends.annotator, text_id=text_id)

    def process(span: AnswerSpan) -> tuple[int, list[QAPair]]:
        gold = normalize_answer(span.text)
        cands = backends.qg.qg_generate(text, span, beam_size)
        kept = []
        for rank, question in enumerate(cands.questions, start=1):
            verdict = backends.qa.qa_answer(text, question)
            if f1_overlap(normalize_answer(verdict.answer_text), gold) >= filter_threshold:
                kept.append(QAPair(question, span.text, span, rank))
        return len(cands.questions), kept

    try:
        if workers > 1 and len(spans) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(process, spans))
        else:
            results = [process(span) for span in spans]
    except BackendError as err:
        raise err.with_text_id(text_id) from err

    generated = sum(n for n, _ in results)
    survivors = [(span_idx, pair) for span_idx, (_, kept) in enumerate(results) for pair in kept]
    best: dict[str, tuple[int, int]] = {}
    for span_idx, pair in survivors:
        cand = (pair.beam_rank, span_idx)
        if pair.question not in best or cand < best[pair.question]:
            best[pair.question] = cand
    pairs = tuple(
        pair for span_idx, pair in survivors if best[pair.question] == (pair.beam_rank, span_idx)
    )
    stats = FilterStats(
        spans=len(spans),
        generated=generated,
        filtered=generated - len(survivors),
        duplicates=len(survivors) - len(pairs),
        retained=len(pairs),
    )
    if not spans:
        logger.info("no answer spans in text %s; question bank is empty", text_id)
    return QuestionBank(
        text_id=text_id,
        text_hash=digest,
        pairs=pairs,
        beam_size=beam_size,
        filter_threshold=filter_threshold,
        backend_fingerprint=backends.bank_fingerprint,
        filter_stats=stats,
    )


def _bank_lines(bank: QuestionBank) -> list[str]:
    header = {
        "record": "header",
        "version": BANK_FORMAT_VERSION,
        "text_id": bank.text_id,
        "text_hash": bank.text_hash,
        "beam_size": bank.beam_size,
        "filter_threshold": bank.filter_threshold,
        "backend_fingerprint": bank.backend_fingerprint,
        "filter_stats": bank.filter_stats.__dict__,
        "n_pairs": len(bank.pairs),
    }
    lines = [json.dumps(header, ensure_ascii=False)]
    for pair in bank.pairs:
        lines.append(
            json.dumps(
                {
                    "record": "pair",
                    "question": pair.question,
                    "raw_answer": pair.raw_answer,
                    "span": pair.source_span.to_json(),
                    "beam_rank": pair.beam_rank,
                },
                ensure_ascii=False,
            )
        )
    return lines


def atomic_write_text(path: str | Path, content: str) -> None:
    """Write via a temp file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(content)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_bank(bank: QuestionBank, path: str | Path) -> None:
    atomic_write_text(path, "\n".join(_bank_lines(bank)) + "\n")


def load_bank(path: str | Path) -> QuestionBank:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError("empty bank file", path=str(path), line=1)

    def parse(lineno: int, kind: str) -> dict:
        try:
            record = json.loads(lines[lineno - 1])
        except json.JSONDecodeError as err:
            raise FormatError(f"invalid JSON: {err.msg}", path=str(path), line=lineno) from err
        if not isinstance(record, dict) or record.get("record") != kind:
            raise FormatError(f"expected a {kind} record", path=str(path), line=lineno)
        return record

    header = parse(1, "header")
    try:
        n_pairs = int(header["n_pairs"])
        stats = FilterStats(**header["filter_stats"])
        meta = dict(
            text_id=str(header["text_id"]),
            text_hash=str(header["text_hash"]),
            beam_size=int(header["beam_size"]),
            filter_threshold=float(header["filter_threshold"]),
            backend_fingerprint=str(header["backend_fingerprint"]),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f"bad header: {err!r}", path=str(path), line=1) from err

    pairs = []
    for lineno in range(2, len(lines) + 1):
        record = parse(lineno, "pair")
        try:
            pairs.append(
                QAPair(
                    question=str(record["question"]),
                    raw_answer=str(record["raw_answer"]),
                    source_span=AnswerSpan.from_json(record["span"]),
                    beam_rank=int(record["beam_rank"]),
                )
            )
        except (KeyError, TypeError, ValueError) as err:
            raise FormatError(f"bad pair record: {err!r}", path=str(path), line=lineno) from err
    if len(pairs) != n_pairs:
        raise FormatError(
            f"truncated bank: header declares {n_pairs} pairs, found {len(pairs)}",
            path=str(path),
            line=len(lines) + 1,
        )
    return QuestionBank(pairs=tuple(pairs), filter_stats=stats, **meta)


class BankStore:
    """On-disk bank cache keyed by text, beam size, filter and backends.

    Without a directory it only memoizes in memory for the lifetime of the
    store.
    """

    def __init__(self, directory: str | Path | None = None) -> None:
        self.directory = Path(directory) if directory is not None else None
        self._memory: dict[str, QuestionBank] = {}
        self._lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        self.hits = 0
        self.builds = 0

    def _key(self, text: str, beam_size: int, filter_threshold: float, backends: Backends) -> str:
        raw = f"{text_hash(text)}|{beam_size}|{filter_threshold!r}|{backends.bank_fingerprint}"
        return text_hash(raw)[:24]

    def get(
        self,
        text: str,
        backends: Backends,
        beam_size: int,
        filter_threshold: float = 1.0,
        *,
        workers: int = 1,
    ) -> QuestionBank:
        key = self._key(text, beam_size, filter_threshold, backends)
        with self._lock:
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            with self._lock:
                if key in self._memory:
                    self.hits += 1
                    return self._memory[key]
            path = self.directory / f"bank-{key}.jsonl" if self.directory is not None else None
            if path is not None and path.exists():
                bank = load_bank(path)
                with self._lock:
                    self.hits += 1
            else:
                bank = build_question_bank(
                    text, backends, beam_size, filter_threshold=filter_threshold, workers=workers
                )
                with self._lock:
                    self.builds += 1
                if path is not None:
                    save_bank(bank, path)
            with self._lock:
                self._memory[key] = bank
            return bank
