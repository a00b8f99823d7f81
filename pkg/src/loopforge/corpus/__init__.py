"""Bundled example programs, one directory of C units per program."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

CORPUS_DIR = Path(__file__).resolve().parent

# programs whose entry is not ``main``
ENTRIES = {"chain": "fun1"}


@dataclass(frozen=True)
class CorpusProgram:
    name: str
    files: tuple
    entry: str

    def sources(self) -> list:
        return [(p.name, p.read_text(encoding="utf-8")) for p in self.files]


def program(name: str) -> CorpusProgram:
    d = CORPUS_DIR / name
    files = tuple(sorted(d.glob("*.c")))
    if not files:
        raise KeyError(f"no corpus program named {name!r}")
    return CorpusProgram(name, files, ENTRIES.get(name, "main"))


def programs() -> list:
    return [program(d.name) for d in sorted(CORPUS_DIR.iterdir()) if d.is_dir() and any(d.glob("*.c"))]
