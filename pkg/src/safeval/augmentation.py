"""Synthetic unanswerable QA examples built by reassigning questions to
foreign paragraphs."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from safeval.backends.base import QABackend
from safeval.errors import BackendError, FormatError
from safeval.question_bank import atomic_write_text
from safeval.text_processing import UNANSWERABLE, is_unanswerable

logger = logging.getLogger(__name__)

Origin = Literal["original", "negative_sampled"]
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class QATriplet:
    paragraph: str
    question: str
    answer: str
    origin: Origin = "original"

    def __post_init__(self) -> None:
        if self.origin not in ("original", "negative_sampled"):
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.origin == "negative_sampled" and not is_unanswerable(self.answer):
            raise ValueError("negative samples must be unanswerable")

    def to_json(self) -> dict:
        return {"paragraph": self.paragraph, "question": self.question, "answer": self.answer, "origin": self.origin}


def _assign_foreign(paragraphs: Sequence[str], rng: np.random.Generator) -> np.ndarray:
    """Map every index to a triplet whose paragraph differs from its own.

    Starts from a uniform random permutation and repairs each self-assignment
    by swapping with the nearest later position where the swap is valid for
    both sides. If a paragraph dominates the dataset no valid permutation may
    exist; those positions fall back to a uniform draw among foreign
    paragraphs.
    """
    n = len(paragraphs)
    perm = rng.permutation(n)
    for i in range(n):
        if paragraphs[perm[i]] != paragraphs[i]:
            continue
        for step in range(1, n):
            k = (i + step) % n
            if paragraphs[perm[k]] != paragraphs[i] and paragraphs[perm[i]] != paragraphs[k]:
                perm[i], perm[k] = perm[k], perm[i]
                break
        else:
            foreign = [j for j in range(n) if paragraphs[j] != paragraphs[i]]
            perm[i] = foreign[int(rng.integers(len(foreign)))]
    return perm


def build_negatives(
    dataset: Sequence[QATriplet], ratio: float = 1.0, seed: int = 0
) -> list[QATriplet]:
    """Return the originals followed by ``ceil(ratio * N)`` negative triplets.

    Each negative pairs a question with the paragraph of another triplet and
    an unanswerable answer. Ratios above 1 draw several shuffled copies.
    """
    if not ratio > 0:
        raise ValueError("ratio must be > 0")
    originals = list(dataset)
    n = len(originals)
    paragraphs = [t.paragraph for t in originals]
    if len(set(paragraphs)) < 2:
        raise ValueError("negative sampling needs at least two distinct paragraphs")

    n_neg = math.ceil(ratio * n)
    rng = np.random.default_rng(seed)
    negatives: list[QATriplet] = []
    while len(negatives) < n_neg:
        order = rng.permutation(n)
        perm = _assign_foreign(paragraphs, rng)
        for i in order[: n_neg - len(negatives)]:
            negatives.append(
                QATriplet(paragraphs[perm[i]], originals[i].question, UNANSWERABLE, "negative_sampled")
            )
    return originals + negatives


def load_triplets(path: str | Path) -> list[QATriplet]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(
                    QATriplet(
                        paragraph=str(rec["paragraph"]),
                        question=str(rec["question"]),
                        answer=str(rec["answer"]),
                        origin=rec.get("origin", "original"),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
                raise FormatError(f"bad QA triplet: {err}", path=str(path), line=lineno) from err
    return out


def save_triplets(triplets: Iterable[QATriplet], path: str | Path) -> None:
    body = "".join(json.dumps(t.to_json(), ensure_ascii=False) + "\n" for t in triplets)
    atomic_write_text(path, body)


def triplet_category(triplet: QATriplet) -> str:
    if triplet.origin == "negative_sampled":
        return "negative_sampled"
    return "unanswerable" if is_unanswerable(triplet.answer) else "answerable"


def export_answerability_distribution(
    qa: QABackend, triplets: Iterable[QATriplet]
) -> tuple[list[dict], int]:
    """Log-answerability ``log(1 - p_unanswerable)`` per triplet, by category.

    Returns the rows and the number of triplets skipped after backend
    failures. A probability of exactly 1 is floored to ``log(1e-300)`` so the
    output stays finite.
    """
    rows = []
    skipped = 0
    for t in triplets:
        try:
            verdict = qa.qa_answer(t.paragraph, t.question)
        except BackendError as err:
            logger.warning("skipping triplet: %s", err)
            skipped += 1
            continue
        rows.append(
            {
                "category": triplet_category(t),
                "log_answerability": math.log(max(1.0 - verdict.prob_unanswerable, _LOG_FLOOR)),
            }
        )
    return rows, skipped
