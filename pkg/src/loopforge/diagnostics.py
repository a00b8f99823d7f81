from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field

log = logging.getLogger("loopforge")


class CompileError(Exception):
    """A fatal frontend or synthesis diagnostic with a source position."""

    def __init__(self, message: str, file: str = "<input>", line: int = 0, col: int = 0):
        super().__init__(message)
        self.message = message
        self.file = file
        self.line = line
        self.col = col

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}: error: {self.message}"


@dataclass
class Diagnostic:
    severity: str
    message: str
    file: str = "<input>"
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}: {self.severity}: {self.message}"


@dataclass
class Diagnostics:
    items: list = field(default_factory=list)
    stream: object = None

    def warn(self, message: str, file: str = "<input>", line: int = 0, col: int = 0) -> None:
        self._add(Diagnostic("warning", message, file, line, col))

    def note(self, message: str, file: str = "<input>", line: int = 0, col: int = 0) -> None:
        self._add(Diagnostic("note", message, file, line, col))

    def _add(self, d: Diagnostic) -> None:
        self.items.append(d)
        if self.stream is not None:
            print(d, file=self.stream)

    def warnings(self) -> list:
        return [d for d in self.items if d.severity == "warning"]

    @classmethod
    def to_stderr(cls) -> "Diagnostics":
        return cls(stream=sys.stderr)
