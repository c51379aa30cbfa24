"""Query-weighter training data and a reference logistic-regression weighter.

Training labels follow the summarization-dataset recipe: a question generated
on a document is *important* when the QA model can answer it from the human
summary of that document. The classifier itself is a bag-of-words logistic
regression, optionally with one question/document token-overlap feature.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Literal, Sequence

import numpy as np

from safeval.backends.base import Backends, text_hash
from safeval.errors import BackendError, FormatError
from safeval.question_bank import BankStore, atomic_write_text

logger = logging.getLogger(__name__)

FeatureMode = Literal["question_tokens", "question_plus_doc_overlap"]
_TOKEN_RE = re.compile(r"\w+")
_P_MIN = 1e-15
_P_MAX = 1.0 - 1e-15


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def doc_overlap(question: str, document: str) -> float:
    """Fraction of distinct question tokens that also occur in the document."""
    q = set(tokenize(question))
    if not q:
        return 0.0
    return len(q & set(tokenize(document))) / len(q)


@dataclass(frozen=True)
class WeighterExample:
    question: str
    document_id: str
    label: bool
    doc_overlap: float = 0.0

    def to_json(self) -> dict:
        return {
            "question": self.question,
            "document_id": self.document_id,
            "label": self.label,
            "doc_overlap": self.doc_overlap,
        }


@dataclass
class WeighterDataset:
    examples: list[WeighterExample] = field(default_factory=list)
    skipped_documents: list[str] = field(default_factory=list)

    def __iter__(self) -> Iterator[WeighterExample]:
        return iter(self.examples)

    def __len__(self) -> int:
        return len(self.examples)

    def __getitem__(self, i: int) -> WeighterExample:
        return self.examples[i]


def build_weighter_dataset(
    corpus: Iterable[tuple[str, str, str]],
    backends: Backends,
    beam_size: int = 1,
    *,
    filter_threshold: float = 1.0,
    store: BankStore | None = None,
) -> WeighterDataset:
    """Label every document question by whether the gold summary answers it.

    ``corpus`` yields ``(document_id, document, gold_summary)``. Documents
    whose backends fail are skipped and listed in ``skipped_documents``.
    """
    store = store or BankStore()
    out = WeighterDataset()
    for doc_id, document, gold in corpus:
        if not gold:
            raise ValueError(f"document {doc_id!r} has no gold summary")
        try:
            bank = store.get(document, backends, beam_size, filter_threshold)
            rows = [
                WeighterExample(
                    question=pair.question,
                    document_id=doc_id,
                    label=not backends.qa.qa_answer(gold, pair.question).unanswerable,
                    doc_overlap=doc_overlap(pair.question, document),
                )
                for pair in bank.pairs
            ]
        except BackendError as err:
            logger.warning("skipping document %s: %s", doc_id, err)
            out.skipped_documents.append(doc_id)
            continue
        out.examples.extend(rows)
    return out


def save_examples(examples: Iterable[WeighterExample], path: str | Path) -> None:
    lines = [json.dumps(ex.to_json(), ensure_ascii=False) for ex in examples]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_examples(path: str | Path) -> list[WeighterExample]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(
                    WeighterExample(
                        question=str(rec["question"]),
                        document_id=str(rec["document_id"]),
                        label=bool(rec["label"]),
                        doc_overlap=float(rec.get("doc_overlap", 0.0)),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
                raise FormatError(f"bad weighter example: {err}", path=str(path), line=lineno) from err
    return out


@dataclass
class LinearWeighter:
    vocabulary: dict[str, int]
    weights: np.ndarray
    bias: float
    feature_mode: FeatureMode = "question_tokens"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = len(self.vocabulary) + (1 if self.feature_mode == "question_plus_doc_overlap" else 0)
        if self.weights.shape != (expected,):
            raise ValueError(f"expected {expected} weights, got shape {self.weights.shape}")

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def to_json(self) -> dict:
        return {
            "vocabulary": self.vocabulary,
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "feature_mode": self.feature_mode,
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinearWeighter":
        return cls(
            vocabulary={str(k): int(v) for k, v in obj["vocabulary"].items()},
            weights=np.asarray(obj["weights"], dtype=np.float64),
            bias=float(obj["bias"]),
            feature_mode=obj.get("feature_mode", "question_tokens"),
            metadata=dict(obj.get("metadata", {})),
        )

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "LinearWeighter":
        try:
            return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            raise FormatError(f"bad weighter model: {err}", path=str(path)) from err


def build_vocabulary(questions: Iterable[str]) -> dict[str, int]:
    tokens = sorted({tok for q in questions for tok in tokenize(q)})
    return {tok: i for i, tok in enumerate(tokens)}


def featurize(
    questions: Sequence[str],
    vocabulary: dict[str, int],
    feature_mode: FeatureMode = "question_tokens",
    overlaps: Sequence[float] | None = None,
) -> np.ndarray:
    """Token-count rows; out-of-vocabulary tokens are dropped."""
    extra = 1 if feature_mode == "question_plus_doc_overlap" else 0
    X = np.zeros((len(questions), len(vocabulary) + extra), dtype=np.float64)
    for i, q in enumerate(questions):
        for tok in tokenize(q):
            j = vocabulary.get(tok)
            if j is not None:
                X[i, j] += 1.0
    if extra:
        if overlaps is None:
            raise ValueError("overlap features need per-question overlap values")
        X[:, -1] = overlaps
    return X


def sigmoid(z):
    # split by sign so large |z| never overflows exp
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def class_weights(y: np.ndarray) -> np.ndarray:
    """Inverse-frequency weights so both classes carry equal total mass."""
    n = y.shape[0]
    n_pos = float(y.sum())
    n_neg = n - n_pos
    return np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * n_neg))


def loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, sample_weight: np.ndarray, l2: float
) -> tuple[float, np.ndarray, float]:
    """Weighted mean cross-entropy plus ``l2/2 * ||w||^2`` and its gradient.

    The bias is not regularized.
    """
    z = X @ w + b
    total = sample_weight.sum()
    # log(1 + e^z) - y z is the cross-entropy written on logits
    ce = np.logaddexp(0.0, z) - y * z
    loss = float(sample_weight @ ce / total + 0.5 * l2 * (w @ w))
    resid = sample_weight * (sigmoid(z) - y) / total
    grad_w = X.T @ resid + l2 * w
    grad_b = float(resid.sum())
    return loss, grad_w, grad_b


def train_weighter(
    examples: Sequence[WeighterExample],
    epochs: int = 500,
    learning_rate: float = 0.5,
    l2: float = 1e-3,
    seed: int = 0,
    *,
    feature_mode: FeatureMode = "question_tokens",
    balance_classes: bool = True,
) -> LinearWeighter:
    """Fit a logistic-regression weighter by full-batch gradient descent.

    Parameters start from a seeded N(0, 0.01^2) draw; each epoch is a single
    gradient step. The loss trajectory, final loss and training accuracy are
    stored in ``metadata``.
    """
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    labels = [ex.label for ex in examples]
    if not any(labels) or all(labels):
        raise ValueError("training a weighter needs at least one example of each class")

    vocab = build_vocabulary(ex.question for ex in examples)
    X = featurize(
        [ex.question for ex in examples], vocab, feature_mode, [ex.doc_overlap for ex in examples]
    )
    y = np.asarray(labels, dtype=np.float64)
    sw = class_weights(y) if balance_classes else np.ones_like(y)

    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, size=X.shape[1])
    b = 0.0
    history = []
    for _ in range(epochs):
        loss, gw, gb = loss_and_grad(w, b, X, y, sw, l2)
        history.append(loss)
        w = w - learning_rate * gw
        b = b - learning_rate * gb
    final_loss, _, _ = loss_and_grad(w, b, X, y, sw, l2)
    accuracy = float(np.mean((sigmoid(X @ w + b) > 0.5) == (y == 1)))
    logger.info("weighter trained: loss %.4f, train accuracy %.3f", final_loss, accuracy)
    return LinearWeighter(
        vocabulary=vocab,
        weights=w,
        bias=float(b),
        feature_mode=feature_mode,
        metadata={
            "epochs": epochs,
            "learning_rate": learning_rate,
            "l2": l2,
            "seed": seed,
            "balance_classes": balance_classes,
            "n_examples": len(examples),
            "final_loss": final_loss,
            "train_accuracy": accuracy,
            "loss_history": history,
        },
    )


def weighter_predict(model: LinearWeighter, question: str, document: str = "") -> float:
    """Probability that ``question`` targets important content of ``document``."""
    overlaps = [doc_overlap(question, document)] if model.feature_mode == "question_plus_doc_overlap" else None
    x = featurize([question], model.vocabulary, model.feature_mode, overlaps)[0]
    p = float(sigmoid(x @ model.weights + model.bias))
    # float64 sigmoid saturates for |z| > ~37; keep the open interval
    return min(max(p, _P_MIN), _P_MAX)


class LinearWeighterBackend:
    """Adapter exposing a trained :class:`LinearWeighter` as a weighter backend."""

    def __init__(self, model: LinearWeighter) -> None:
        self.model = model
        payload = {k: v for k, v in model.to_json().items() if k != "metadata"}
        self.fingerprint = "linear:" + text_hash(json.dumps(payload, sort_keys=True))[:16]

    @classmethod
    def from_file(cls, path: str | Path) -> "LinearWeighterBackend":
        return cls(LinearWeighter.load(path))

    def weight_query(self, question: str, document: str) -> float:
        return weighter_predict(self.model, question, document)
