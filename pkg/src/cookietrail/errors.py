"""Error types shared across the pipeline.

Fatal problems raise :class:`InputError` or :class:`InvariantError`; both
carry a stable machine-readable ``code`` so the CLI can emit structured
error records.  Recoverable problems found while parsing are collected as
:class:`ParseIssue` values instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass


class PipelineError(Exception):
    """Base class for all library errors."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message

    def as_record(self) -> dict:
        return {"error": self.code, "message": self.message}


class InputError(PipelineError):
    """Malformed or unusable input data (CLI exit code 1)."""


class InvariantError(PipelineError):
    """Structural invariant violated by otherwise well-formed input (CLI exit code 2)."""


@dataclass(frozen=True)
class ParseIssue:
    """A non-fatal problem collected during parsing.

    ``line`` is the 1-based line number in the source file when known.
    """

    code: str
    detail: str
    line: int | None = None

    def as_record(self) -> dict:
        record = {"error": self.code, "message": self.detail}
        if self.line is not None:
            record["line"] = self.line
        return record
