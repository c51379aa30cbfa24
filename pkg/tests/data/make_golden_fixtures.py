"""Regenerate the golden corpus and its fixture backend.

    python3 tests/data/make_golden_fixtures.py

Two documents, four systems each. Every document is a list of facts, one
sentence per fact with a single answer entity. A summary keeps some facts,
optionally replacing one fact's entity with a wrong one. Fixture responses
follow from that: the QA model finds an entity iff the sentence is present,
and questions about dropped facts are unanswerable on the summary.
"""

from __future__ import annotations

import json
from pathlib import Path

HERE = Path(__file__).parent

# (sentence template, entity, question, decoy question, importance weight)
DOCS = {
    "d1": [
        ("The storm made landfall near {} on Monday.", "Galveston", "Where did the storm make landfall?",
         "Which city was evacuated?", 0.9),
        ("Officials ordered the evacuation of {} residents.", "forty thousand", "How many residents were evacuated?",
         "Who ordered the evacuation?", 0.8),
        ("Power was cut to the {} district overnight.", "harbour", "Which district lost power?",
         "When was power cut?", 0.5),
        ("A local bakery handed out free {} to volunteers.", "bread rolls", "What did the bakery hand out?",
         "Who received the free food?", 0.1),
    ],
    "d2": [
        ("The museum acquired a painting by {} last week.", "Vermeer", "Whose painting did the museum acquire?",
         "What did the museum acquire?", 0.9),
        ("The purchase was funded by the {}.", "Clarke Foundation", "Who funded the purchase?",
         "How was the purchase funded?", 0.7),
        ("It will hang in the {} gallery from spring.", "east", "Which gallery will the painting hang in?",
         "When will the painting be shown?", 0.4),
        ("The gift shop now sells matching {}.", "postcards", "What does the gift shop sell?",
         "Which shop sells matching items?", 0.1),
    ],
}

WRONG = {
    ("d1", 0): "Houston",
    ("d1", 1): "four thousand",
    ("d2", 0): "Rembrandt",
    ("d2", 1): "city council",
}

# system -> per document: (kept fact indices, index of the fact to corrupt or None)
SYSTEMS = {
    "sysA": {"d1": ([0, 1, 2], None), "d2": ([0, 1, 2], None)},
    "sysB": {"d1": ([0, 1], None), "d2": ([0, 2], None)},
    "sysC": {"d1": ([0, 3], 0), "d2": ([1, 3], 1)},
    "sysD": {"d1": ([2, 3], None), "d2": ([3], None)},
}

RELEVANCE = {
    ("sysA", "d1"): [5, 5, 4],
    ("sysB", "d1"): [4, 4, 4],
    ("sysC", "d1"): [2, 3, 2],
    ("sysD", "d1"): [2, 1, 2],
    ("sysA", "d2"): [5, 4, 5],
    ("sysB", "d2"): [4, 3, 4],
    ("sysC", "d2"): [2, 2, 3],
    ("sysD", "d2"): [1, 1, 1],
}

REFERENCES = {
    "d1": ["The storm hit Galveston and forty thousand residents were evacuated.",
           "Forty thousand people left Galveston as the storm arrived."],
    "d2": ["The museum bought a Vermeer funded by the Clarke Foundation.",
           "A Vermeer painting paid for by the Clarke Foundation will hang in the east gallery."],
}


def render(facts, entities):
    text, spans = "", []
    for (template, _, _, _, _), entity in zip(facts, entities):
        if text:
            text += " "
        prefix, suffix = template.split("{}")
        start = len(text) + len(prefix)
        text += prefix + entity + suffix
        spans.append({"text": entity, "start": start, "end": start + len(entity), "kind": "noun"})
    return text, spans


def build():
    fixture, corpus = [], []
    doc_texts = {}
    for doc_id, facts in DOCS.items():
        text, spans = render(facts, [f[1] for f in facts])
        doc_texts[doc_id] = text
        fixture.append({"kind": "text", "id": doc_id, "text": text})
        fixture.append({"kind": "annotate", "context_id": doc_id, "spans": spans})
        for fact in facts:
            _, entity, question, decoy, weight = fact
            fixture.append({"kind": "qg", "context_id": doc_id, "answer": entity, "questions": [question, decoy]})
            fixture.append({"kind": "qa", "context_id": doc_id, "question": question, "answer": entity,
                            "prob_unanswerable": 0.02})
            # the decoy gets a different answer on the document, so it is filtered out
            fixture.append({"kind": "qa", "context_id": doc_id, "question": decoy, "answer": "the officials",
                            "prob_unanswerable": 0.1})
            fixture.append({"kind": "weighter", "context_id": doc_id, "question": question, "weight": weight})

    for system, plan in SYSTEMS.items():
        for doc_id, (kept, corrupt) in plan.items():
            facts = DOCS[doc_id]
            sid = f"{doc_id}-{system}"
            chosen = [facts[i] for i in kept]
            entities = [WRONG[(doc_id, i)] if i == corrupt else facts[i][1] for i in kept]
            text, spans = render(chosen, entities)
            fixture.append({"kind": "text", "id": sid, "text": text})
            fixture.append({"kind": "annotate", "context_id": sid, "spans": spans})
            for i, fact in enumerate(facts):
                question = fact[2]
                if i in kept:
                    answer = WRONG[(doc_id, i)] if i == corrupt else fact[1]
                    fixture.append({"kind": "qg", "context_id": sid, "answer": answer, "questions": [question]})
                    fixture.append({"kind": "qa", "context_id": sid, "question": question, "answer": answer,
                                    "prob_unanswerable": 0.03})
                else:
                    fixture.append({"kind": "qa", "context_id": sid, "question": question,
                                    "answer": "<unanswerable>", "prob_unanswerable": 0.95})
            corpus.append({
                "example_id": sid,
                "system_id": system,
                "document": doc_texts[doc_id],
                "summary": text,
                "references": REFERENCES[doc_id],
                "annotations": {
                    "relevance": RELEVANCE[(system, doc_id)],
                    "consistency": [1, 2, 1] if corrupt is not None else [5, 5, 4],
                },
            })
    return fixture, corpus


def main():
    fixture, corpus = build()
    (HERE / "golden_fixture.jsonl").write_text("".join(json.dumps(r) + "\n" for r in fixture), encoding="utf-8")
    (HERE / "golden_corpus.jsonl").write_text("".join(json.dumps(r) + "\n" for r in corpus), encoding="utf-8")


if __name__ == "__main__":
    main()
