"""Non-fatal findings reported next to results instead of raised."""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from enum import StrEnum


class Severity(StrEnum):
    WARNING = "warning"
    ERROR = "error"


@dataclass(frozen=True)
class Diagnostic:
    """One finding about an input, optionally pinned to a vertex or face index."""

    severity: Severity
    code: str
    message: str
    index: int | None = None

    def sort_key(self) -> tuple[str, int, str]:
        return (self.code, -1 if self.index is None else self.index, self.message)

    def to_text(self) -> str:
        index = "-" if self.index is None else str(self.index)
        return f"{self.severity.value.upper()} {self.code} {index}: {self.message}"

    def to_dict(self) -> dict:
        return {"severity": self.severity.value, "code": self.code, "message": self.message, "index": self.index}


def warning(code: str, message: str, index: int | None = None) -> Diagnostic:
    return Diagnostic(Severity.WARNING, code, message, None if index is None else int(index))


def error(code: str, message: str, index: int | None = None) -> Diagnostic:
    return Diagnostic(Severity.ERROR, code, message, None if index is None else int(index))


@dataclass(frozen=True)
class Diagnostics:
    """Immutable, deterministically ordered collection of diagnostics (by code, then index)."""

    items: tuple[Diagnostic, ...] = field(default=())

    @classmethod
    def of(cls, items: Iterable[Diagnostic]) -> Diagnostics:
        return cls(tuple(sorted(items, key=Diagnostic.sort_key)))

    def merge(self, *others: Diagnostics) -> Diagnostics:
        collected = list(self.items)
        for other in others:
            collected.extend(other.items)
        return Diagnostics.of(collected)

    def __iter__(self) -> Iterator[Diagnostic]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __bool__(self) -> bool:
        return bool(self.items)

    @property
    def has_errors(self) -> bool:
        return any(d.severity is Severity.ERROR for d in self.items)

    def codes(self) -> set[str]:
        return {d.code for d in self.items}

    def to_text(self) -> str:
        """Line-oriented rendering: ``SEVERITY CODE index: message``."""
        return "".join(d.to_text() + "\n" for d in self.items)

    def to_list(self) -> list[dict]:
        return [d.to_dict() for d in self.items]

    def to_json(self) -> str:
        return json.dumps(self.to_list(), indent=2)


EMPTY = Diagnostics()
