"""Random small scoring cases with a direct, bank-free evaluation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from safeval.backends import Backends, FixtureBackend
from safeval.text_processing import UNANSWERABLE

ENTITIES = ["red fox", "oak", "the river", "Mara", "seven", "old mill", "north gate", "Ivo"]


@dataclass
class Case:
    document: str
    summary: str
    records: list = field(default_factory=list)
    # question -> (gold answer, answer on own text); filtering is decided from these
    doc_questions: dict = field(default_factory=dict)
    sum_questions: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    # doc question -> (answer, prob_unanswerable) on the summary
    on_summary: dict = field(default_factory=dict)
    # summary question -> answer on the document
    on_document: dict = field(default_factory=dict)

    def backends(self) -> Backends:
        fb = FixtureBackend(self.records)
        return Backends(qa=fb, qg=fb, annotator=fb, weighter=fb)


def _text(rng, tag, n):
    ents = list(rng.choice(ENTITIES, size=n, replace=False))
    parts, spans, pos = [], [], 0
    for i, e in enumerate(ents):
        prefix = f"{tag} clause {i} mentions "
        start = pos + len(prefix)
        spans.append({"text": e, "start": start, "end": start + len(e), "kind": "noun"})
        sentence = prefix + e + "."
        parts.append(sentence)
        pos += len(sentence) + 1
    return " ".join(parts), ents, spans


def _bag(s):
    words = [w.strip(".,").lower() for w in s.split()]
    return Counter(w for w in words if w and w not in ("a", "an", "the"))


def random_case(rng: np.random.Generator, max_questions: int = 5, tag: str = "", max_beams: int = 2) -> Case:
    document, d_ents, d_spans = _text(rng, f"doc{tag}", int(rng.integers(1, 4)))
    summary, s_ents, s_spans = _text(rng, f"sum{tag}", int(rng.integers(1, 3)))
    case = Case(document, summary)
    recs = case.records
    recs.append({"kind": "text", "id": "D", "text": document})
    recs.append({"kind": "text", "id": "S", "text": summary})
    recs.append({"kind": "annotate", "context_id": "D", "spans": d_spans})
    recs.append({"kind": "annotate", "context_id": "S", "spans": s_spans})

    budget = max_questions
    for side, ents, qmap in (("D", d_ents, case.doc_questions), ("S", s_ents, case.sum_questions)):
        for j, ent in enumerate(ents):
            if budget <= 0:
                break  # remaining spans get no questions (a QG fixture miss)
            k = min(int(rng.integers(1, max_beams + 1)), budget)
            qs = [f"{side} q{j}.{b}?" for b in range(k)]
            recs.append({"kind": "qg", "context_id": side, "answer": ent, "questions": qs})
            for q in qs:
                own = ent if rng.random() < 0.7 else str(rng.choice(ENTITIES))
                recs.append({"kind": "qa", "context_id": side, "question": q, "answer": own,
                             "prob_unanswerable": float(rng.uniform(0, 0.4))})
                qmap[q] = (ent, own)
            budget -= k
    for q in case.doc_questions:
        w = float(rng.choice([0.0, rng.uniform(0, 1), 1.0]))
        case.weights[q] = w
        recs.append({"kind": "weighter", "context_id": "D", "question": q, "weight": w})
        if rng.random() < 0.4:
            ans, p = UNANSWERABLE, float(rng.uniform(0.5, 1.0))
        else:
            ans, p = str(rng.choice(ENTITIES)), float(rng.uniform(0, 0.5))
        case.on_summary[q] = (ans, p)
        recs.append({"kind": "qa", "context_id": "S", "question": q, "answer": ans, "prob_unanswerable": p})
    for q in case.sum_questions:
        ans = str(rng.choice(ENTITIES)) if rng.random() < 0.8 else UNANSWERABLE
        case.on_document[q] = ans
        recs.append({"kind": "qa", "context_id": "D", "question": q, "answer": ans,
                     "prob_unanswerable": 0.9 if ans == UNANSWERABLE else 0.1})
    return case


def _token_f1(a: str, b: str) -> float:
    if a == UNANSWERABLE or b == UNANSWERABLE:
        return float(a == b)
    x, y = _bag(a), _bag(b)
    common = sum((x & y).values())
    if common == 0:
        return 0.0
    return 2 * common / (sum(x.values()) + sum(y.values()))


def _rank(question: str) -> int:
    return int(question.rstrip("?").rsplit(".", 1)[1]) + 1


def direct_scores(case: Case, mode: str, beam_size: int = 1) -> tuple[float, float]:
    """Precision and recall straight from the case tables."""

    def kept(table):
        return [q for q, (gold, own) in table.items() if _rank(q) <= beam_size and _bag(gold) == _bag(own)]

    kept_s, kept_d = kept(case.sum_questions), kept(case.doc_questions)
    p = sum(_token_f1(case.on_document[q], case.sum_questions[q][0]) for q in kept_s)
    p = p / len(kept_s) if kept_s else 0.0
    num = den = 0.0
    for q in kept_d:
        w = 1.0 if mode == "uniform" else case.weights[q]
        num += w * (1.0 - case.on_summary[q][1])
        den += w
    r = num / den if den > 0 else 0.0
    return p, r


FILLER = ["the", "man", "river", "bridge", "saw", "built", "old", "city", "was", "near"]


def separable_examples(rng: np.random.Generator, n: int = 120):
    """Questions containing "who" are important, ones about "colour" are not."""
    from safeval.weighter import WeighterExample

    out = []
    for i in range(n):
        words = list(rng.choice(FILLER, size=int(rng.integers(2, 6))))
        if i % 2 == 0:
            q = "who " + " ".join(words) + "?"
        else:
            q = "what colour " + " ".join(words) + "?"
        out.append(WeighterExample(q, f"doc{i % 7}", i % 2 == 0))
    return out
