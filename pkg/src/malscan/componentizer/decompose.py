from __future__ import annotations

import bisect
import itertools
import logging
import re

from ..languages import LanguageId
from .model import CodeComponent, ComponentKind, SourceFile, Span, component_id
from .segmenters import Decl, segment

logger = logging.getLogger(__name__)

DEFAULT_FRAGMENT_BYTES = 8 * 1024
_BLANK_LINE = re.compile(rb"\n[ \t\r\f\v]*\n")


class _Offsets:
    """Character offset -> UTF-8 byte offset and line-number lookups."""

    def __init__(self, text: str):
        self.newlines = [i for i, ch in enumerate(text) if ch == "\n"]
        self.ascii = text.isascii()
        if not self.ascii:
            self.bytes = [0, *itertools.accumulate(len(ch.encode("utf-8", "surrogateescape")) for ch in text)]

    def byte(self, char_offset: int) -> int:
        return char_offset if self.ascii else self.bytes[char_offset]

    def line(self, char_offset: int) -> int:
        return bisect.bisect_left(self.newlines, char_offset) + 1


def _component(file: SourceFile, offsets: _Offsets, kind: ComponentKind, name: str,
               start: int, end: int, parent_id: str | None) -> CodeComponent:
    span = Span(offsets.byte(start), offsets.byte(end))
    first_line = offsets.line(start)
    last_line = offsets.line(max(start, end - 1))
    if not name:
        name = f"<{kind.value} L{first_line}>"
    return CodeComponent(
        id=component_id(file.path, span, kind),
        path=file.path,
        language=file.language,
        kind=kind,
        name=name,
        span=span,
        source=file.content[start:end],
        start_line=first_line,
        end_line=last_line,
        parent_id=parent_id,
    )


def _residual_ranges(text: str, decls: list[Decl]) -> list[tuple[int, int]]:
    """Non-blank gaps between top-level declarations, trimmed of whitespace."""
    gaps = []
    cursor = 0
    for lo, hi in [(d.start, d.end) for d in decls] + [(len(text), len(text))]:
        chunk = text[cursor:lo]
        if chunk.strip():
            start = cursor + len(chunk) - len(chunk.lstrip())
            end = cursor + len(chunk.rstrip())
            gaps.append((start, end))
        cursor = max(cursor, hi)
    return gaps


def decompose(file: SourceFile) -> list[CodeComponent]:
    """Split ``file`` into functions, classes, methods and residual fragments.

    Files in an unregistered language are cut into fixed-size fragments.
    Raises :class:`ParseFailure` when the structural scan fails; callers
    should then use :func:`fallback_fragment`.
    """
    if not file.content:
        return []
    if file.language is LanguageId.UNKNOWN:
        return fallback_fragment(file, DEFAULT_FRAGMENT_BYTES)

    decls = sorted(segment(file.content, file.language, file.path), key=lambda d: d.start)
    offsets = _Offsets(file.content)
    out: list[CodeComponent] = []
    for decl in decls:
        parent = _component(file, offsets, decl.kind, decl.name, decl.start, decl.end, None)
        out.append(parent)
        for child in sorted(decl.children, key=lambda d: d.start):
            out.append(_component(file, offsets, child.kind, child.name, child.start, child.end, parent.id))
    for start, end in _residual_ranges(file.content, decls):
        out.append(_component(file, offsets, ComponentKind.MODULE_FRAGMENT, "", start, end, None))
    out.sort(key=lambda c: (c.span.start, -c.span.end))
    return out


def _split_points(data: bytes, max_bytes: int) -> list[int]:
    points = []
    start = 0
    n = len(data)
    while n - start > max_bytes:
        limit = start + max_bytes
        cut = -1
        # after a blank line, then after any newline, then a UTF-8 boundary
        blanks = list(_BLANK_LINE.finditer(data, start, limit))
        if blanks:
            cut = blanks[-1].end()
        else:
            nl = data.rfind(b"\n", start, limit)
            if nl >= 0:
                cut = nl + 1
        if cut <= start:
            cut = limit
            while cut > start + 1 and (data[cut] & 0xC0) == 0x80:
                cut -= 1
            if (data[cut] & 0xC0) == 0x80:
                cut = limit
        points.append(cut)
        start = cut
    return points


def fallback_fragment(file: SourceFile, max_bytes: int = DEFAULT_FRAGMENT_BYTES) -> list[CodeComponent]:
    """Cut ``file`` into ``module_fragment`` pieces of at most ``max_bytes``.

    Cuts prefer the end of a blank line, then any line end, then a UTF-8
    character boundary. The fragment sources concatenate back to the file.
    """
    if max_bytes <= 0:
        raise ValueError("max_bytes must be positive")
    data = file.data
    if not data:
        return []
    bounds = [0, *_split_points(data, max_bytes), len(data)]
    out = []
    for lo, hi in zip(bounds, bounds[1:]):
        span = Span(lo, hi)
        source = data[lo:hi].decode("utf-8", errors="surrogateescape")
        first_line = data.count(b"\n", 0, lo) + 1
        last_line = first_line + source.count("\n", 0, max(0, len(source) - 1))
        kind = ComponentKind.MODULE_FRAGMENT
        out.append(
            CodeComponent(
                id=component_id(file.path, span, kind),
                path=file.path,
                language=file.language,
                kind=kind,
                name=f"<fragment L{first_line}-{last_line}>",
                span=span,
                source=source,
                start_line=first_line,
                end_line=last_line,
            )
        )
    return out
