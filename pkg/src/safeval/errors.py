"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class SafevalError(Exception):
    """Base class for all toolkit errors."""


class BackendError(SafevalError):
    """A model or annotation backend failed to produce a usable response.

    ``retriable`` marks transport-level failures that a caller may safely
    retry; ``text_id`` identifies the text being processed when known.
    """

    def __init__(
        self,
        message: str,
        *,
        kind: str | None = None,
        retriable: bool = False,
        text_id: str | None = None,
    ) -> None:
        super().__init__(message)
        self.kind = kind
        self.retriable = retriable
        self.text_id = text_id

    def with_text_id(self, text_id: str | None) -> "BackendError":
        if text_id is None or self.text_id is not None:
            return self
        err = BackendError(str(self), kind=self.kind, retriable=self.retriable, text_id=text_id)
        err.__cause__ = self
        return err

    def __str__(self) -> str:
        msg = super().__str__()
        if self.text_id is not None:
            return f"{msg} [text_id={self.text_id}]"
        return msg


class ScoringError(SafevalError):
    """A backend failure surfaced while computing one side of the score."""

    def __init__(self, side: str, cause: BaseException) -> None:
        super().__init__(f"{side} scoring failed: {cause}")
        self.side = side
        self.cause = cause


class FormatError(SafevalError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None) -> None:
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}:"
        super().__init__(f"{where} {message}".strip())
        self.path = path
        self.line = line


class UndefinedCorrelationError(SafevalError, ValueError):
    """Pearson correlation is undefined (too few points or zero variance)."""
