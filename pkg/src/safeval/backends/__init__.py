"""Pluggable QA, QG, weighter and annotation backends."""

from __future__ import annotations

from pathlib import Path

from safeval.backends.base import (
    Annotator,
    BackendDescriptor,
    Backends,
    QABackend,
    QAVerdict,
    QGBackend,
    QGCandidates,
    UniformWeighter,
    WeighterBackend,
    text_hash,
)
from safeval.backends.cache import CachedBackend
from safeval.backends.fixture import FixtureBackend
from safeval.backends.remote import RemoteBackend

__all__ = [
    "Annotator",
    "BackendDescriptor",
    "Backends",
    "CachedBackend",
    "FixtureBackend",
    "QABackend",
    "QAVerdict",
    "QGBackend",
    "QGCandidates",
    "RemoteBackend",
    "UniformWeighter",
    "WeighterBackend",
    "open_backends",
    "text_hash",
]


def open_backends(
    descriptors: dict[str, BackendDescriptor],
    *,
    cache_dir: str | Path | None = None,
    max_in_flight: int = 8,
) -> Backends:
    """Instantiate one backend per kind, sharing instances for identical sources.

    With ``cache_dir`` every non-trivial backend is wrapped in a
    :class:`CachedBackend`.
    """
    from safeval.weighter import LinearWeighterBackend

    opened: dict[tuple, object] = {}

    def build(desc: BackendDescriptor):
        source = (desc.implementation, desc.endpoint, desc.fixture_path)
        if source in opened:
            return opened[source]
        if desc.implementation == "fixture":
            backend = FixtureBackend.from_file(desc.fixture_path)
        elif desc.implementation == "remote":
            backend = RemoteBackend(desc.endpoint, max_in_flight=max_in_flight, **desc.options)
        elif desc.implementation == "model":
            backend = LinearWeighterBackend.from_file(desc.fixture_path)
        else:
            backend = UniformWeighter()
        if cache_dir is not None and desc.implementation in ("fixture", "remote"):
            backend = CachedBackend(backend, cache_dir)
        opened[source] = backend
        return backend

    missing = {"qa", "qg", "annotator"} - set(descriptors)
    if missing:
        raise ValueError(f"missing backend descriptors: {sorted(missing)}")
    weighter_desc = descriptors.get("weighter")
    return Backends(
        qa=build(descriptors["qa"]),
        qg=build(descriptors["qg"]),
        annotator=build(descriptors["annotator"]),
        weighter=build(weighter_desc) if weighter_desc else UniformWeighter(),
    )
