"""Minimal ROUGE baselines: n-gram recall and LCS F-measure."""

from __future__ import annotations

import re
from collections import Counter
from typing import Sequence

_TOKEN_RE = re.compile(r"\w+")


def rouge_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n_recall(reference: str, candidate: str, n: int = 1) -> float:
    """Fraction of reference n-grams found in the candidate (clipped counts)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ref = _ngrams(rouge_tokens(reference), n)
    total = sum(ref.values())
    if total == 0:
        return 0.0
    overlap = ref & _ngrams(rouge_tokens(candidate), n)
    return sum(overlap.values()) / total


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(reference: str, candidate: str) -> float:
    """LCS-based F1 between reference and candidate tokens."""
    ref, cand = rouge_tokens(reference), rouge_tokens(candidate)
    if not ref or not cand:
        return 0.0
    lcs = lcs_length(ref, cand)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(cand), lcs / len(ref)
    return 2 * p * r / (p + r)


def best_over_references(score_fn, references: Sequence[str], candidate: str, **kw) -> float:
    if not references:
        raise ValueError("no references")
    return max(score_fn(ref, candidate, **kw) for ref in references)
