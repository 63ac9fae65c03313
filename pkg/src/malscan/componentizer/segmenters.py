"""Per-language-family structural scanners.

Each scanner turns a file into a tree of :class:`Decl` records holding
character offsets. Only top-level functions/classes and the methods directly
inside a class are reported; anything nested deeper stays in its parent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..languages import LanguageId
from .lexer import lex
from .model import ComponentKind, ParseFailure


@dataclass
class Decl:
    kind: ComponentKind
    name: str
    start: int
    end: int
    children: list["Decl"] = field(default_factory=list)


# --------------------------------------------------------------------------
# Python


@dataclass
class _LogicalLine:
    start: int
    end: int
    indent: int
    text: str


_PY_DEF = re.compile(r"(?:async\s+)?def\s+(\w+)")
_PY_CLASS = re.compile(r"class\s+(\w+)")


def _python_lines(masked: str, code: str, literal_newlines: frozenset[int], path: str) -> list[_LogicalLine]:
    """Group physical lines into logical lines.

    ``masked`` has comments and literals blanked (used for bracket depth);
    ``code`` only has comments blanked (used for line extents, so that a
    docstring counts as a statement).
    """
    lines: list[_LogicalLine] = []
    depth = 0
    pos = 0
    n = len(masked)
    current: _LogicalLine | None = None
    while pos <= n:
        nl = masked.find("\n", pos)
        if nl < 0:
            nl = n
        raw = code[pos:nl]
        if raw.strip():
            first = pos + len(raw) - len(raw.lstrip())
            last = pos + len(raw.rstrip())
            if current is None:
                current = _LogicalLine(first, last, first - pos, "")
            else:
                current.end = last
        bare = masked[pos:nl].strip()
        for ch in bare:
            if ch in "([{":
                depth += 1
            elif ch in ")]}":
                depth -= 1
                if depth < 0:
                    raise ParseFailure(path, pos, "unbalanced closing bracket")
        continues = depth > 0 or nl in literal_newlines or bare.endswith("\\")
        if current is not None and not continues:
            current.text = code[current.start:current.end]
            lines.append(current)
            current = None
        pos = nl + 1
    if depth != 0 or current is not None:
        raise ParseFailure(path, n, "unclosed bracket at end of file")
    return lines


def _python_block_end(lines: list[_LogicalLine], idx: int, indent: int) -> int:
    k = idx
    while k + 1 < len(lines) and lines[k + 1].indent > indent:
        k += 1
    return k


def _python_defs(lines: list[_LogicalLine], lo: int, hi: int, indent: int, in_class: bool) -> list[Decl]:
    decls: list[Decl] = []
    i = lo
    while i < hi:
        line = lines[i]
        if line.indent != indent:
            i += 1
            continue
        head = i
        while head < hi and lines[head].indent == indent and lines[head].text.startswith("@"):
            head += 1
        if head >= hi or lines[head].indent != indent:
            i = head
            continue
        text = lines[head].text
        m_def = _PY_DEF.match(text)
        m_cls = None if m_def else _PY_CLASS.match(text)
        if not (m_def or m_cls):
            i = head + 1
            continue
        last = _python_block_end(lines, head, indent)
        start, end = lines[i].start, lines[last].end
        if m_def:
            kind = ComponentKind.METHOD if in_class else ComponentKind.FUNCTION
            decls.append(Decl(kind, m_def.group(1), start, end))
        elif not in_class:
            decl = Decl(ComponentKind.CLASS, m_cls.group(1), start, end)
            if last > head:
                body_indent = lines[head + 1].indent
                decl.children = _python_defs(lines, head + 1, last + 1, body_indent, True)
            decls.append(decl)
        i = last + 1
    return decls


def python_decls(text: str, path: str) -> list[Decl]:
    masked = lex(text, LanguageId.PYTHON, path)
    lines = _python_lines(masked.text, masked.without_comments, masked.literal_newlines, path)
    if lines and lines[0].indent != 0:
        raise ParseFailure(path, lines[0].start, "unexpected indent")
    return _python_defs(lines, 0, len(lines), 0, False)


# --------------------------------------------------------------------------
# Brace languages

_SEMICOLON_LANGS = {LanguageId.C, LanguageId.CPP, LanguageId.JAVA, LanguageId.CSHARP, LanguageId.PHP, LanguageId.RUST}

_CONTROL = {
    "if", "else", "for", "foreach", "while", "do", "switch", "case", "default", "try", "catch",
    "finally", "return", "throw", "new", "using", "lock", "fixed", "unsafe", "checked", "unchecked",
    "synchronized", "match", "when", "loop", "guard", "defer", "repeat", "select", "go", "with",
    "elif", "elseif", "import", "package", "require", "include", "static",
}

_MODIFIERS = re.compile(
    r"(?:(?:public|private|protected|internal|static|final|abstract|async|export|default|declare|"
    r"override|open|sealed|data|inline|suspend|pub(?:\s*\([^)]*\))?|unsafe|extern(?=\s+fn\b)|virtual|"
    r"const(?=\s+(?:fn|func|function)\b)|partial|readonly|implicit|lazy|fileprivate|mutating|native|"
    r"synchronized|strictfp|tailrec|operator|infix|external|inner|enum(?=\s+class\b)|annotation|"
    r"value(?=\s+class\b)|case(?=\s+(?:class|object)\b)|required|convenience|dynamic|nonisolated|"
    r"template\s*<[^{]*?>|constexpr|explicit|noexcept|friend)\s+)+"
)
_FUNC_KEYWORD = re.compile(r"(?:fn|func|function\*?|fun|def)(?=[\s(<*]|$)")
_CLASS_KEYWORD = re.compile(r"\b(class|struct|interface|enum|trait|impl|object|record|protocol|extension|union)\b")
_IMPL_NAME = re.compile(r"impl\s*(?:<[^{]*?>)?\s*([\w:]+(?:<[^{]*?>)?)(?:\s+for\s+([\w:]+))?")
_TYPE_NAME = re.compile(r"\s*([A-Za-z_$][\w$]*)")
_FUNC_ASSIGN = re.compile(
    r"(?:(?:const|let|var|val)\s+)?([\w$.]+)\s*(?::[^=]+)?=\s*(?:async\s+)?"
    r"(?:function\b|\([^()]*\)\s*(?::\s*[^=]+)?=>|[\w$]+\s*=>)"
)
_NAME_BEFORE_PAREN = re.compile(r"(operator\s*\S+?|[~\w$][\w$:.~]*)\s*(?:<[^()]*>)?\s*$")
_CONTINUATION_END = (",", "(", "=", ":", "|", "&", "+", "-", "*", "/", ".", "<", ">", "->", "=>", "?")
_CONTINUATION_START = (")", ":", ".", ",", "extends", "implements", "where", "throws", "->", "=>", "with", "<")


def _strip_attributes(h: str, language: LanguageId) -> str:
    while True:
        h = h.lstrip()
        if h.startswith("@"):
            m = re.match(r"@[\w.]+", h)
            if not m:
                return h
            rest = h[m.end():]
            if rest.startswith("("):
                close = _balanced_close(rest, 0)
                if close < 0:
                    return h
                rest = rest[close + 1:]
            h = rest
            continue
        if h.startswith("#[") or (language in (LanguageId.CSHARP, LanguageId.PHP) and h.startswith("[")):
            close = _balanced_close(h, h.index("["), "[", "]")
            if close < 0:
                return h
            h = h[close + 1:]
            continue
        return h


def _balanced_close(s: str, open_at: int, open_ch: str = "(", close_ch: str = ")") -> int:
    depth = 0
    for k in range(open_at, len(s)):
        if s[k] == open_ch:
            depth += 1
        elif s[k] == close_ch:
            depth -= 1
            if depth == 0:
                return k
    return -1


def _top_level_index(h: str, target: str) -> int:
    """Index of ``target`` outside (), [] and <> nesting, or -1."""
    depth = 0
    for k, ch in enumerate(h):
        if depth == 0 and h.startswith(target, k):
            return k
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
    return -1


def _has_assignment(h: str) -> bool:
    depth = 0
    for k, ch in enumerate(h):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == "=" and depth == 0:
            before = h[k - 1] if k else ""
            after = h[k + 1] if k + 1 < len(h) else ""
            if before in "=!<>+-*/%&|^" or after in "=>":
                continue
            return True
    return False


def _func_name(h: str) -> str | None:
    paren = _top_level_index(h, "(")
    if paren < 0:
        return None
    m = _NAME_BEFORE_PAREN.search(h[:paren])
    return m.group(1).strip().lstrip(".") if m else None


_ACCESS_LABEL = re.compile(r"\s*(?:public|private|protected)\s*:(?!:)")


class _BraceScanner:
    def __init__(self, text: str, language: LanguageId, path: str):
        self.text = text
        self.language = language
        self.path = path
        self.masked = lex(text, language, path).text
        self.match = self._match_braces()
        self.newline_lang = language not in _SEMICOLON_LANGS

    def _match_braces(self) -> dict[int, int]:
        match: dict[int, int] = {}
        stack: list[int] = []
        for k, ch in enumerate(self.masked):
            if ch == "{":
                stack.append(k)
            elif ch == "}":
                if not stack:
                    raise ParseFailure(self.path, k, "unmatched '}'")
                match[stack.pop()] = k
        if stack:
            raise ParseFailure(self.path, stack[-1], "unclosed '{'")
        return match

    # header discovery ------------------------------------------------------

    def header_start(self, brace: int, lo: int) -> int:
        m = self.masked
        line_start = max(lo, m.rfind("\n", lo, brace) + 1)
        cut = max(m.rfind(t, line_start, brace) for t in ";{}")
        label = _ACCESS_LABEL.match(m, line_start, brace)
        if label and self.language is LanguageId.CPP:
            cut = max(cut, label.end() - 1)
        start = line_start
        if cut >= 0:
            start = cut + 1
        else:
            for _ in range(40):
                prev_end = start - 1
                if prev_end < lo:
                    break
                prev_start = max(lo, m.rfind("\n", lo, prev_end) + 1)
                prev = m[prev_start:prev_end]
                if not prev.strip() or self._stop_line(prev):
                    break
                if not self._continues(prev, m[start:brace]):
                    break
                cut = max(prev.rfind(t) for t in ";{}")
                if cut >= 0:
                    start = prev_start + cut + 1
                    break
                start = prev_start
        while start < brace and m[start].isspace():
            start += 1
        return start

    def _stop_line(self, line: str) -> bool:
        s = line.strip()
        if self.language is LanguageId.CPP and _ACCESS_LABEL.fullmatch(s):
            return True
        return s.startswith("<?") or s.endswith("?>")

    def _continues(self, prev: str, header: str) -> bool:
        if not self.newline_lang:
            return True
        p, h = prev.strip(), header.strip()
        if not h:
            return True
        if p.startswith("@") or p.endswith(_CONTINUATION_END):
            return True
        if h.startswith(_CONTINUATION_START):
            return True
        return header.count("(") < header.count(")")

    # classification --------------------------------------------------------

    def classify(self, header: str, in_class: bool) -> tuple[str, ComponentKind | None, str | None]:
        """Return (role, kind, name); role is "decl", "container" or "other"."""
        lang = self.language
        h = " ".join(header.split())
        h = _strip_attributes(h, lang).strip()
        if not h:
            return "other", None, None
        if not in_class:
            if re.fullmatch(r"(?:inline\s+|export\s+|declare\s+)*namespace(?:\s+[\w:.]+)?", h) or h == "extern":
                return "container", None, None
            if lang is LanguageId.RUST and re.fullmatch(r"(?:pub(?:\s*\([^)]*\))?\s+)?mod\s+\w+", h):
                return "container", None, None
        m = _MODIFIERS.match(h)
        if m:
            h = h[m.end():]
        first = re.match(r"[\w$]+", h)
        if first and first.group(0) in _CONTROL:
            return "other", None, None
        callable_kind = ComponentKind.METHOD if in_class else ComponentKind.FUNCTION

        m = _FUNC_KEYWORD.match(h)
        if m:
            rest = h[m.end():].lstrip()
            receiver = None
            if lang is LanguageId.GO and rest.startswith("("):
                close = _balanced_close(rest, 0)
                recv = rest[1:close].split()
                receiver = recv[-1].lstrip("*") if recv else None
                rest = rest[close + 1:]
            name = _func_name(rest)
            if not name:
                ident = re.match(r"[\w$]+", rest)
                name = ident.group(0) if ident else None
            if name and receiver:
                name = f"{receiver}.{name}"
            return "decl", callable_kind, name

        cls = _CLASS_KEYWORD.search(h)
        paren = _top_level_index(h, "(")
        eq = _has_assignment(h)
        c_like = lang in (LanguageId.C, LanguageId.CPP)
        if cls and not eq and (paren < 0 or (cls.start() < paren and not c_like)):
            if in_class:
                return "other", None, None
            if cls.group(1) == "impl":
                im = _IMPL_NAME.match(h, cls.start())
                name = None
                if im:
                    name = f"{im.group(1)} for {im.group(2)}" if im.group(2) else im.group(1)
            elif lang is LanguageId.GO and h.startswith("type "):
                name = re.match(r"type\s+(\w+)", h).group(1)
            else:
                tm = _TYPE_NAME.match(h, cls.end())
                name = tm.group(1) if tm else None
            return "decl", ComponentKind.CLASS, name

        if eq:
            if lang in (LanguageId.JAVASCRIPT, LanguageId.TYPESCRIPT):
                fm = _FUNC_ASSIGN.match(h)
                if fm:
                    return "decl", callable_kind, fm.group(1)
            return "other", None, None

        if paren >= 0 and _balanced_close(h, paren) >= 0:
            name = _func_name(h)
            if name and name not in _CONTROL:
                return "decl", callable_kind, name
        return "other", None, None

    # scanning ---------------------------------------------------------------

    def block_end(self, close: int) -> int:
        """Extend past a trailing ``;`` (or ``} Name;`` typedef tail) on the same line."""
        m = self.masked
        k = close + 1
        tail = re.match(r"[ \t]*(?:[\w\s,*]*?)?;", m[k:k + 200])
        if tail and "\n" not in tail.group(0):
            return k + tail.end()
        return k

    def scan(self, lo: int, hi: int, in_class: bool) -> list[Decl]:
        m = self.masked
        decls: list[Decl] = []
        i = lo
        paren = 0
        while i < hi:
            ch = m[i]
            if ch in "([":
                paren += 1
            elif ch in ")]":
                paren = max(0, paren - 1)
            elif ch == "{":
                close = self.match[i]
                if paren:
                    i = close + 1
                    continue
                start = self.header_start(i, lo)
                role, kind, name = self.classify(m[start:i], in_class)
                end = self.block_end(close)
                if role == "container":
                    decls.extend(self.scan(i + 1, close, False))
                elif role == "decl":
                    decl = Decl(kind, name or "", start, end)
                    if kind is ComponentKind.CLASS:
                        decl.children = self.scan(i + 1, close, True)
                    decls.append(decl)
                i = end
                continue
            i += 1
        return decls


def brace_decls(text: str, language: LanguageId, path: str) -> list[Decl]:
    scanner = _BraceScanner(text, language, path)
    return scanner.scan(0, len(text), False)


# --------------------------------------------------------------------------
# Ruby

_RUBY_TOKEN = re.compile(
    r"(?<![\w.@$:])(def|class|module|if|unless|while|until|case|begin|for|do|end)(?![\w?!]|:[^:])"
)
_RUBY_ENDLESS_DEF = re.compile(r"def\s+(?:self\.)?[\w?!]+(?:\([^)]*\))?\s+=\s")
_RUBY_DEF_NAME = re.compile(r"def\s+((?:self\.)?[^\s(;]+)")
_RUBY_CLASS_NAME = re.compile(r"(?:class|module)\s+(<<\s*\w+|[\w:]+)")
_RUBY_PREFIX_OK = re.compile(r"(?:^|[=(,|&;])\s*$")


@dataclass
class _RubyBlock:
    keyword: str
    start: int
    line: int
    end: int = -1
    children: list["_RubyBlock"] = field(default_factory=list)
    do_seen: bool = False


def ruby_decls(text: str, path: str) -> list[Decl]:
    m = lex(text, LanguageId.RUBY, path).text
    root = _RubyBlock("root", 0, -1)
    stack = [root]
    for tok in _RUBY_TOKEN.finditer(m):
        kw, pos = tok.group(1), tok.start()
        line_start = m.rfind("\n", 0, pos) + 1
        prefix = m[line_start:pos]
        prefix = prefix[prefix.rfind(";") + 1:]
        line_no = m.count("\n", 0, pos)
        if kw == "end":
            if len(stack) == 1:
                raise ParseFailure(path, pos, "unmatched 'end'")
            block = stack.pop()
            block.end = tok.end()
            stack[-1].children.append(block)
            continue
        if kw in ("if", "unless", "while", "until", "for") and not _RUBY_PREFIX_OK.search(prefix):
            continue  # statement modifier
        if kw == "do":
            top = stack[-1]
            if top.keyword in ("while", "until", "for") and top.line == line_no and not top.do_seen:
                top.do_seen = True
                continue
        if kw == "def" and _RUBY_ENDLESS_DEF.match(m, pos):
            continue
        start = pos
        if kw in ("def", "class", "module") and re.fullmatch(r"\s*(?:(?:private|protected|public|module_function)\s+)*", prefix):
            start = line_start + len(prefix) - len(prefix.lstrip())
        stack.append(_RubyBlock(kw, start, line_no))
    if len(stack) > 1:
        raise ParseFailure(path, stack[-1].start, f"unclosed '{stack[-1].keyword}'")

    def name_of(block: _RubyBlock) -> str:
        rx = _RUBY_DEF_NAME if block.keyword == "def" else _RUBY_CLASS_NAME
        found = rx.search(m, block.start)
        return found.group(1) if found else ""

    def top_level(blocks: list[_RubyBlock]) -> list[Decl]:
        out: list[Decl] = []
        for b in blocks:
            if b.keyword == "module":
                out.extend(top_level(b.children))
            elif b.keyword == "def":
                out.append(Decl(ComponentKind.FUNCTION, name_of(b), b.start, b.end))
            elif b.keyword == "class":
                methods = [
                    Decl(ComponentKind.METHOD, name_of(c), c.start, c.end) for c in b.children if c.keyword == "def"
                ]
                out.append(Decl(ComponentKind.CLASS, name_of(b), b.start, b.end, methods))
        return out

    return top_level(root.children)


def segment(text: str, language: LanguageId, path: str) -> list[Decl]:
    if language is LanguageId.PYTHON:
        return python_decls(text, path)
    if language is LanguageId.RUBY:
        return ruby_decls(text, path)
    return brace_decls(text, language, path)
