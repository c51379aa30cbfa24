"""Fixture data shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

EXPLAIN_TEXT_IDS = ("document", "summary_correct", "summary_hallucinated", "summary_incomplete")


def explain_example_path() -> Path:
    """Fixture backend reproducing the explainability example: one document,
    one important question about where the Changing of the Guard took place,
    and a correct, a hallucinated and an incomplete summary."""
    return Path(str(resources.files(__name__).joinpath("explain_example.jsonl")))


def explain_example_texts() -> dict[str, str]:
    from safeval.backends.fixture import FixtureBackend

    backend = FixtureBackend.from_file(explain_example_path())
    return {tid: backend.text(tid) for tid in EXPLAIN_TEXT_IDS}
