"""Persistent response cache in front of any backend."""

from __future__ import annotations

import json
import logging
import threading
from pathlib import Path
from typing import Any, Sequence

from safeval.backends.base import QAVerdict, QGCandidates, text_hash
from safeval.text_processing import AnswerSpan

logger = logging.getLogger(__name__)


def _key(*parts: Any) -> str:
    return text_hash(json.dumps(parts, ensure_ascii=False))[:32]


class CachedBackend:
    """Memoizes backend responses in an append-only JSON-lines file.

    The file lives under ``cache_dir`` and is named after the wrapped
    backend's fingerprint, so different backends never share entries. Reads
    are lock-free; writes are serialized. ``hits`` and ``misses`` count
    lookups since construction.
    """

    def __init__(self, inner: Any, cache_dir: str | Path) -> None:
        self.inner = inner
        self.fingerprint = inner.fingerprint
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        self.path = cache_dir / f"responses-{text_hash(self.fingerprint)[:16]}.jsonl"
        self._store: dict[str, Any] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    # a torn final line from an interrupted run; everything before it is usable
                    logger.warning("ignoring unreadable cache line %s:%d", self.path, lineno)
                    continue
                self._store[record["k"]] = record["v"]

    def _lookup(self, key: str) -> Any:
        value = self._store.get(key)
        with self._lock:
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
        return value

    def _save(self, key: str, value: Any) -> None:
        line = json.dumps({"k": key, "v": value}, ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock:
            if key in self._store:
                return
            self._store[key] = value
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line)

    def qa_answer(self, context: str, question: str) -> QAVerdict:
        key = _key("qa", text_hash(context), question)
        hit = self._lookup(key)
        if hit is not None:
            return QAVerdict(hit["answer"], hit["prob_unanswerable"], hit.get("fixture_miss", False))
        verdict = self.inner.qa_answer(context, question)
        self._save(
            key,
            {
                "answer": verdict.answer_text,
                "prob_unanswerable": verdict.prob_unanswerable,
                "fixture_miss": verdict.fixture_miss,
            },
        )
        return verdict

    def qg_generate(self, context: str, answer: AnswerSpan, beam_size: int) -> QGCandidates:
        key = _key("qg", text_hash(context), answer.text, answer.char_start, beam_size)
        hit = self._lookup(key)
        if hit is not None:
            return QGCandidates(tuple(hit["questions"]), beam_size, hit.get("fixture_miss", False))
        cands = self.inner.qg_generate(context, answer, beam_size)
        self._save(key, {"questions": list(cands.questions), "fixture_miss": cands.fixture_miss})
        return cands

    def weight_query(self, question: str, document: str) -> float:
        key = _key("weighter", text_hash(document), question)
        hit = self._lookup(key)
        if hit is not None:
            return hit["weight"]
        weight = self.inner.weight_query(question, document)
        self._save(key, {"weight": weight})
        return weight

    def annotate(self, text: str) -> Sequence[AnswerSpan]:
        key = _key("annotate", text_hash(text))
        hit = self._lookup(key)
        if hit is not None:
            return [AnswerSpan.from_json(s) for s in hit["spans"]]
        spans = list(self.inner.annotate(text))
        self._save(key, {"spans": [s.to_json() for s in spans]})
        return spans

    @property
    def stats(self) -> dict[str, int]:
        return {"hits": self.hits, "misses": self.misses}
