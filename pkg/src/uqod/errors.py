"""Error types shared by the readers and the report pipeline.

Each error carries the process exit code the command-line layer maps it to,
so the mapping lives in one place.
"""

from __future__ import annotations


class UqodError(Exception):
    """Base class for toolkit errors."""

    exit_code = 1


class SchemaError(UqodError):
    """Input file missing, unreadable, or violating the wire format."""

    exit_code = 2

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])

    def __str__(self) -> str:
        base = super().__str__()
        if self.diagnostics:
            return base + "\n" + "\n".join("  - " + d for d in self.diagnostics)
        return base


class EmptyManifestError(UqodError):
    """Manifest has no entries to evaluate."""

    exit_code = 3


class ImageSetMismatchError(UqodError):
    """Runs under comparison do not cover the same image ids."""

    exit_code = 4
