"""Annotated summarization corpora.

One JSON object per line::

    {"example_id": "...", "system_id": "...", "document": "...", "summary": "...",
     "references": ["..."], "annotations": {"relevance": [4, 5, 3], ...}}

Annotation values may be a single number or a list of annotator scores, which
are averaged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping

from safeval.errors import FormatError

DIMENSIONS: tuple[str, ...] = ("consistency", "coherence", "fluency", "relevance")
CorpusFormat = Literal["summeval_like", "qags_like"]


@dataclass(frozen=True)
class AnnotatedExample:
    example_id: str
    document: str
    summary: str
    system_id: str = ""
    references: tuple[str, ...] = ()
    human: Mapping[str, float] = field(default_factory=dict)


def _mean_score(value, where: str) -> float:
    scores = value if isinstance(value, list) else [value]
    if not scores:
        raise ValueError(f"{where}: no annotator scores")
    out = []
    for s in scores:
        if isinstance(s, bool) or not isinstance(s, (int, float)) or not math.isfinite(s):
            raise ValueError(f"{where}: non-finite or non-numeric score {s!r}")
        out.append(float(s))
    return math.fsum(out) / len(out)


def parse_example(record: dict, fmt: CorpusFormat = "summeval_like") -> AnnotatedExample:
    if not isinstance(record, dict):
        raise ValueError("record is not a JSON object")
    for key in ("example_id", "document", "summary"):
        if not isinstance(record.get(key), str) or (key != "summary" and not record[key]):
            raise ValueError(f"field {key!r} missing or not a non-empty string")
    refs = record.get("references", [])
    if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
        raise ValueError("field 'references' must be a list of strings")
    annotations = record.get("annotations", {})
    if not isinstance(annotations, dict):
        raise ValueError("field 'annotations' must be an object")

    human: dict[str, float] = {}
    if fmt == "qags_like":
        # QAGS-style correctness is the consistency dimension
        for key in ("consistency", "correctness"):
            if key in annotations:
                human["consistency"] = _mean_score(annotations[key], f"annotations.{key}")
                break
    else:
        for dim, value in annotations.items():
            if dim not in DIMENSIONS:
                raise ValueError(f"unknown annotation dimension {dim!r}")
            human[dim] = _mean_score(value, f"annotations.{dim}")
    return AnnotatedExample(
        example_id=record["example_id"],
        document=record["document"],
        summary=record["summary"],
        system_id=str(record.get("system_id", "")),
        references=tuple(refs),
        human=human,
    )


def load_corpus(path: str | Path, fmt: CorpusFormat = "summeval_like") -> list[AnnotatedExample]:
    """Read and validate a corpus; errors name the 0-based record index."""
    if fmt not in ("summeval_like", "qags_like"):
        raise ValueError(f"unknown corpus format {fmt!r}")
    examples: list[AnnotatedExample] = []
    seen: set[str] = set()
    with Path(path).open(encoding="utf-8") as fh:
        index = 0
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                ex = parse_example(json.loads(line), fmt)
            except (json.JSONDecodeError, ValueError) as err:
                raise FormatError(f"record {index}: {err}", path=str(path), line=lineno) from err
            if ex.example_id in seen:
                raise FormatError(f"record {index}: duplicate example_id {ex.example_id!r}", path=str(path), line=lineno)
            seen.add(ex.example_id)
            examples.append(ex)
            index += 1
    return examples
