"""Corpus-scale scoring on top of the metric functions."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from safeval.backends.base import Backends
from safeval.errors import BackendError, ScoringError
from safeval.metric import (
    MODES,
    ScoreReport,
    ScoringConfig,
    harmonic_mean,
    precision,
    recall,
    safeval_score,
)
from safeval.question_bank import BankStore

logger = logging.getLogger(__name__)


@dataclass
class Scorer:
    """Backends, configuration and a bank store bundled for repeated scoring."""

    backends: Backends
    config: ScoringConfig = field(default_factory=ScoringConfig)
    store: BankStore = field(default_factory=BankStore)
    workers: int = 1

    def with_beam_size(self, beam_size: int) -> "Scorer":
        return replace(self, config=replace(self.config, beam_size=beam_size))

    def score(self, document: str, summary: str, mode: str = "learned") -> ScoreReport:
        return safeval_score(document, summary, self.backends, mode, config=self.config, store=self.store)

    def score_variants(self, document: str, summary: str, modes: Sequence[str] = MODES) -> dict[str, ScoreReport]:
        """All requested modes for one summary, sharing precision and recall work."""
        cfg = self.config
        need_p = any(m != "recall_only" for m in modes)
        need_weightings = set()
        for m in modes:
            if m in ("uniform", "learned"):
                need_weightings.add(m)
            elif m == "recall_only":
                need_weightings.add(cfg.recall_weighting)

        p = None
        if need_p:
            try:
                sbank = self.store.get(summary, self.backends, cfg.beam_size, cfg.filter_threshold)
                p = precision(document, summary, sbank, self.backends.qa)
            except BackendError as err:
                raise ScoringError("precision", err) from err
        recalls = {}
        if need_weightings:
            try:
                dbank = self.store.get(document, self.backends, cfg.beam_size, cfg.filter_threshold)
                for weighting in sorted(need_weightings):
                    recalls[weighting] = recall(
                        document,
                        summary,
                        dbank,
                        self.backends.qa,
                        self.backends.weighter,
                        weighting,
                        scoring=cfg.recall_scoring,
                        thresholds=cfg.thresholds,
                    )
            except BackendError as err:
                raise ScoringError("recall", err) from err

        out = {}
        for mode in modes:
            if mode == "precision_only":
                score, rows, flags = p
                out[mode] = ScoreReport(mode, score, None, score, tuple(rows), (), flags)
                continue
            r_score, r_rows, r_flags = recalls[mode if mode != "recall_only" else cfg.recall_weighting]
            if mode == "recall_only":
                out[mode] = ScoreReport(mode, None, r_score, r_score, (), tuple(r_rows), r_flags)
                continue
            p_score, p_rows, p_flags = p
            out[mode] = ScoreReport(
                mode,
                p_score,
                r_score,
                harmonic_mean(p_score, r_score),
                tuple(p_rows),
                tuple(r_rows),
                p_flags | r_flags,
            )
        return out

    def score_many(
        self, pairs: Iterable[tuple[str, str, str]], modes: Sequence[str] = MODES
    ) -> dict[str, dict[str, ScoreReport] | Exception]:
        """Score ``(key, document, summary)`` triples in parallel.

        Failures are returned in place of the report dict so one bad summary
        does not abort a corpus run.
        """
        items = list(pairs)

        def job(item):
            key, document, summary = item
            try:
                return key, self.score_variants(document, summary, modes)
            except ScoringError as err:
                logger.warning("scoring %s failed: %s", key, err)
                return key, err

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(job, items))
        else:
            results = [job(item) for item in items]
        return dict(results)
