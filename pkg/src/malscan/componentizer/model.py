from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from ..languages import LanguageId, detect_language

logger = logging.getLogger(__name__)


class ComponentKind(str, Enum):
    FUNCTION = "function"
    METHOD = "method"
    CLASS = "class"
    MODULE_FRAGMENT = "module_fragment"

    def __str__(self) -> str:
        return self.value


class ParseFailure(Exception):
    """The structural parser could not segment a file.

    Callers are expected to fall back to :func:`fallback_fragment`.
    """

    def __init__(self, path: str, position: int, reason: str = "unbalanced structure"):
        super().__init__(f"{path}: cannot segment at offset {position}: {reason}")
        self.path = path
        self.position = position
        self.reason = reason


@dataclass(frozen=True, order=True)
class Span:
    """Half-open byte range ``[start, end)``."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class SourceFile:
    path: str
    language: LanguageId
    content: str
    content_hash: str
    warnings: tuple[str, ...] = ()

    @classmethod
    def from_text(cls, path: str, content: str, language: LanguageId | str | None = None) -> "SourceFile":
        return cls(path, detect_language(path, language), content, content_digest(content))

    @classmethod
    def from_bytes(cls, path: str, data: bytes, language: LanguageId | str | None = None) -> "SourceFile":
        """Decode ``data`` as UTF-8, replacing undecodable bytes and recording a warning."""
        warnings: tuple[str, ...] = ()
        try:
            content = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            content = data.decode("utf-8", errors="replace")
            warnings = (f"invalid UTF-8 at byte {exc.start}; undecodable bytes replaced",)
            logger.warning("%s: %s", path, warnings[0])
        return cls(path, detect_language(path, language), content, content_digest(content), warnings)

    @property
    def data(self) -> bytes:
        return self.content.encode("utf-8", errors="surrogateescape")


def content_digest(content: str) -> str:
    return hashlib.sha256(content.encode("utf-8", errors="surrogateescape")).hexdigest()


def component_id(path: str, span: Span, kind: ComponentKind) -> str:
    key = f"{path}\x00{span.start}\x00{span.end}\x00{kind.value}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class CodeComponent:
    id: str
    path: str
    language: LanguageId
    kind: ComponentKind
    name: str
    span: Span
    source: str
    start_line: int
    end_line: int
    parent_id: Optional[str] = None
    summary: Optional[str] = None

    @property
    def source_bytes(self) -> bytes:
        return self.source.encode("utf-8", errors="surrogateescape")
