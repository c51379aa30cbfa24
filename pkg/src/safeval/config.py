"""Run configuration: one JSON file plus command-line overrides.

Example::

    {
      "backends": {
        "qa": {"implementation": "remote", "endpoint": "http://localhost:8000"},
        "qg": {"implementation": "remote", "endpoint": "http://localhost:8000"},
        "annotator": {"implementation": "fixture", "fixture_path": "spans.jsonl"},
        "weighter": {"implementation": "model", "fixture_path": "weighter.json"}
      },
      "beam_size": 1,
      "filter_threshold": 1.0,
      "weighter_mode": "learned",
      "recall_scoring": "answerability",
      "thresholds": {"importance": 0.5, "answered": 0.5, "hallucination_f1": 0.5},
      "cache_dir": ".safeval-cache",
      "seed": 0,
      "parallelism": 4
    }

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from safeval.backends.base import BACKEND_KINDS, BackendDescriptor, Backends, text_hash
from safeval.metric import ScoringConfig, Thresholds

CONFIG_ENV_VAR = "SAFEVAL_CONFIG"

_KNOWN_KEYS = {
    "backends",
    "beam_size",
    "filter_threshold",
    "weighter_mode",
    "recall_scoring",
    "thresholds",
    "cache_dir",
    "seed",
    "parallelism",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    backends: dict[str, BackendDescriptor] = field(default_factory=dict)
    beam_size: int = 1
    filter_threshold: float = 1.0
    weighter_mode: str = "learned"
    recall_scoring: str = "answerability"
    thresholds: Thresholds = field(default_factory=Thresholds)
    cache_dir: str | None = None
    seed: int = 0
    parallelism: int = 4

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ConfigError("beam_size must be >= 1")
        if not 0.0 <= self.filter_threshold <= 1.0:
            raise ConfigError("filter_threshold must be in [0, 1]")
        if self.weighter_mode not in ("uniform", "learned"):
            raise ConfigError(f"weighter_mode must be uniform or learned, got {self.weighter_mode!r}")
        if self.recall_scoring not in ("answerability", "f1"):
            raise ConfigError(f"recall_scoring must be answerability or f1, got {self.recall_scoring!r}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    @property
    def scoring(self) -> ScoringConfig:
        return ScoringConfig(
            beam_size=self.beam_size,
            filter_threshold=self.filter_threshold,
            recall_scoring=self.recall_scoring,
            recall_weighting=self.weighter_mode,
            thresholds=self.thresholds,
        )

    def with_overrides(self, **overrides) -> "RunConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        try:
            return replace(self, **clean)
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def fingerprint(self, backends: Backends | None = None) -> str:
        """Hash of everything that influences scores (not paths or parallelism)."""
        payload = {
            "beam_size": self.beam_size,
            "filter_threshold": self.filter_threshold,
            "weighter_mode": self.weighter_mode,
            "recall_scoring": self.recall_scoring,
            "thresholds": self.thresholds.__dict__,
            "seed": self.seed,
            "backends": backends.fingerprint if backends is not None else None,
        }
        return text_hash(json.dumps(payload, sort_keys=True))[:16]


def parse_descriptor(kind: str, spec: dict | str, base: Path | None = None) -> BackendDescriptor:
    """Build a descriptor from a config object or a ``impl[:target]`` string."""
    if isinstance(spec, str):
        impl, _, target = spec.partition(":")
        if impl == "remote":
            spec = {"implementation": impl, "endpoint": target}
        elif impl == "uniform":
            spec = {"implementation": impl}
        else:
            spec = {"implementation": impl, "fixture_path": target}
    if not isinstance(spec, dict):
        raise ConfigError(f"backend {kind!r} must be an object")
    path = spec.get("fixture_path")
    if path and base is not None and not Path(path).is_absolute():
        path = str(base / path)
    try:
        return BackendDescriptor(
            kind=kind,
            implementation=spec.get("implementation", ""),
            endpoint=spec.get("endpoint"),
            fixture_path=path,
            options=dict(spec.get("options", {})),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err


def config_from_dict(raw: dict, base: Path | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    backends_raw = raw.get("backends", {})
    if not isinstance(backends_raw, dict):
        raise ConfigError("'backends' must be an object")
    for kind in backends_raw:
        if kind not in BACKEND_KINDS:
            raise ConfigError(f"unknown backend kind {kind!r}")
    descriptors = {kind: parse_descriptor(kind, spec, base) for kind, spec in backends_raw.items()}
    cache_dir = raw.get("cache_dir")
    if cache_dir and base is not None and not Path(cache_dir).is_absolute():
        cache_dir = str(base / cache_dir)
    try:
        thresholds = Thresholds(**raw.get("thresholds", {}))
        return RunConfig(
            backends=descriptors,
            beam_size=int(raw.get("beam_size", 1)),
            filter_threshold=float(raw.get("filter_threshold", 1.0)),
            weighter_mode=raw.get("weighter_mode", "learned"),
            recall_scoring=raw.get("recall_scoring", "answerability"),
            thresholds=thresholds,
            cache_dir=cache_dir,
            seed=int(raw.get("seed", 0)),
            parallelism=int(raw.get("parallelism", 4)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    return config_from_dict(raw, base=path.parent)
