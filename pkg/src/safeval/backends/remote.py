"""JSON-over-HTTP client for model servers.

Wire protocol (ε is the literal string ``"<unanswerable>"``)::

    POST /qa        {"context", "question"}                          -> {"answer", "prob_unanswerable"}
    POST /qg        {"context", "answer", "answer_start", "beam_size"} -> {"questions": [...]}
    POST /weighter  {"document", "question"}                         -> {"weight"}
    POST /annotate  {"text"}                                          -> {"spans": [{"text", "start", "end", "kind"}]}

Every request carries an ``X-Request-Key`` header derived from its body, so
retried requests are recognisable as the same call.
"""

from __future__ import annotations

import json
import logging
import math
import threading
import time
from typing import Any, Sequence

import httpx

from safeval.backends.base import QAVerdict, QGCandidates, text_hash
from safeval.errors import BackendError
from safeval.text_processing import SPAN_KINDS, AnswerSpan, is_unanswerable

logger = logging.getLogger(__name__)

_RETRY_STATUS = frozenset({429, 500, 502, 503, 504})


def request_key(path: str, payload: dict) -> str:
    body = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return text_hash(f"{path}\n{body}")[:32]


class RemoteBackend:
    """Client for one model server implementing some or all endpoints."""

    def __init__(
        self,
        endpoint: str,
        *,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        max_in_flight: int = 8,
        client: httpx.Client | None = None,
    ) -> None:
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.fingerprint = f"remote:{self.endpoint}"
        self.max_retries = max_retries
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self.calls = 0
        self._count_lock = threading.Lock()

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "RemoteBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, path: str, payload: dict, kind: str) -> dict[str, Any]:
        url = f"{self.endpoint}{path}"
        headers = {"X-Request-Key": request_key(path, payload)}
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            with self._slots:
                with self._count_lock:
                    self.calls += 1
                try:
                    resp = self._client.post(url, json=payload, headers=headers)
                except httpx.TransportError as err:
                    last = err
                    logger.warning("%s %s transport error (attempt %d): %s", kind, url, attempt + 1, err)
                    continue
            if resp.status_code in _RETRY_STATUS:
                last = BackendError(f"HTTP {resp.status_code} from {url}", kind=kind, retriable=True)
                logger.warning("%s %s returned %d (attempt %d)", kind, url, resp.status_code, attempt + 1)
                continue
            if resp.status_code != 200:
                raise BackendError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}", kind=kind)
            try:
                body = resp.json()
            except ValueError as err:
                raise BackendError(f"non-JSON response from {url}", kind=kind) from err
            if not isinstance(body, dict):
                raise BackendError(f"response from {url} is not a JSON object", kind=kind)
            return body
        raise BackendError(
            f"{kind} request to {url} failed after {self.max_retries + 1} attempts: {last}",
            kind=kind,
            retriable=True,
        ) from last

    def qa_answer(self, context: str, question: str) -> QAVerdict:
        body = self._post("/qa", {"context": context, "question": question}, "qa")
        answer = body.get("answer")
        prob = _probability(body.get("prob_unanswerable"), "prob_unanswerable", "qa")
        if not isinstance(answer, str):
            raise BackendError("qa response missing string 'answer'", kind="qa")
        if is_unanswerable(answer) and prob < 0.5:
            logger.warning("qa server returned unanswerable with prob_unanswerable=%.3f", prob)
        return QAVerdict(answer, prob)

    def qg_generate(self, context: str, answer: AnswerSpan, beam_size: int) -> QGCandidates:
        if beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        payload = {
            "context": context,
            "answer": answer.text,
            "answer_start": answer.char_start,
            "beam_size": beam_size,
        }
        body = self._post("/qg", payload, "qg")
        questions = body.get("questions")
        if not isinstance(questions, list) or not all(isinstance(q, str) for q in questions):
            raise BackendError("qg response missing list of strings 'questions'", kind="qg")
        # keep beam order, drop duplicates and surplus beams
        deduped = list(dict.fromkeys(questions))[:beam_size]
        if not deduped:
            raise BackendError("qg server returned no questions", kind="qg")
        return QGCandidates(tuple(deduped), beam_size)

    def weight_query(self, question: str, document: str) -> float:
        body = self._post("/weighter", {"document": document, "question": question}, "weighter")
        return _probability(body.get("weight"), "weight", "weighter")

    def annotate(self, text: str) -> Sequence[AnswerSpan]:
        body = self._post("/annotate", {"text": text}, "annotator")
        raw = body.get("spans")
        if not isinstance(raw, list):
            raise BackendError("annotate response missing list 'spans'", kind="annotator")
        spans = []
        for item in raw:
            try:
                if item["kind"] not in SPAN_KINDS:
                    raise ValueError(item["kind"])
                spans.append(AnswerSpan.from_json(item))
            except (KeyError, TypeError, ValueError) as err:
                raise BackendError(f"malformed span {item!r}", kind="annotator") from err
        return spans


def _probability(value: Any, field: str, kind: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BackendError(f"{kind} response field {field!r} is not a number: {value!r}", kind=kind)
    value = float(value)
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise BackendError(f"{kind} response field {field!r} out of [0, 1]: {value!r}", kind=kind)
    return value
