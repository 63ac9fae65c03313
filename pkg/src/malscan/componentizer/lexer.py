"""Blank out comments and literals so structural scanners only see code.

The masked text has the same length as the input and keeps every newline,
so offsets and line numbers carry over unchanged.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..languages import LanguageId
from .model import ParseFailure


@dataclass(frozen=True)
class Syntax:
    line_comments: tuple[str, ...] = ("//",)
    block_comment: tuple[str, str] | None = ("/*", "*/")
    nested_block_comments: bool = False
    single_quote: str = "char"  # "string" | "char" | "none"
    triple_quotes: bool = False
    backtick: str | None = None  # "template" | "raw"
    multiline_strings: bool = False
    preprocessor: bool = False
    regex_literals: bool = False
    rust_raw_strings: bool = False
    verbatim_strings: bool = False
    cpp_raw_strings: bool = False
    heredoc: str | None = None  # "ruby" | "php"
    ruby_block_comments: bool = False


SYNTAX: dict[LanguageId, Syntax] = {
    LanguageId.PYTHON: Syntax(line_comments=("#",), block_comment=None, single_quote="string", triple_quotes=True),
    LanguageId.RUBY: Syntax(
        line_comments=("#",),
        block_comment=None,
        single_quote="string",
        multiline_strings=True,
        heredoc="ruby",
        ruby_block_comments=True,
    ),
    LanguageId.C: Syntax(preprocessor=True),
    LanguageId.CPP: Syntax(preprocessor=True, cpp_raw_strings=True),
    LanguageId.CSHARP: Syntax(preprocessor=True, verbatim_strings=True, triple_quotes=True),
    LanguageId.JAVA: Syntax(triple_quotes=True),
    LanguageId.GO: Syntax(backtick="raw"),
    LanguageId.RUST: Syntax(nested_block_comments=True, rust_raw_strings=True, multiline_strings=True),
    LanguageId.SCALA: Syntax(nested_block_comments=True, triple_quotes=True, backtick="raw"),
    LanguageId.KOTLIN: Syntax(nested_block_comments=True, triple_quotes=True, backtick="raw"),
    LanguageId.SWIFT: Syntax(nested_block_comments=True, triple_quotes=True, single_quote="none"),
    LanguageId.JAVASCRIPT: Syntax(single_quote="string", backtick="template", regex_literals=True),
    LanguageId.TYPESCRIPT: Syntax(single_quote="string", backtick="template", regex_literals=True),
    LanguageId.PHP: Syntax(line_comments=("//", "#"), single_quote="string", multiline_strings=True, heredoc="php"),
}

_CHAR_LITERAL = re.compile(r"'(?:\\(?:u\{[0-9a-fA-F]+\}|[^\n]{1,8}?)|[^'\\\n])'")
_RUST_RAW = re.compile(r'b?r(#*)"')
_CPP_RAW = re.compile(r'(?:u8|[uUL])?R"([^()\\\s]{0,16})\(')
_RUBY_HEREDOC = re.compile(r"<<([~-]?)(['\"`]?)([A-Za-z_]\w*)\2")
_PHP_HEREDOC = re.compile(r"<<<[ \t]*(['\"]?)([A-Za-z_]\w*)\1")
_VERBATIM = re.compile(r'(?:\$@|@\$|@)"')
_REGEX_PRECEDERS = set("(,=:[!&|?{};+-*%<>~^")


def _is_ident(ch: str) -> bool:
    return ch.isalnum() or ch in "_$"


class _Masker:
    def __init__(self, text: str, syntax: Syntax, path: str):
        self.text = text
        self.syntax = syntax
        self.path = path
        self.out = list(text)
        self.nocomment = list(text)
        self.heredocs: list[tuple[str, str]] = []
        self.literal_newlines: set[int] = set()

    def blank(self, start: int, end: int, comment: bool = False) -> None:
        out = self.out
        nocomment = self.nocomment
        for k in range(start, end):
            if out[k] != "\n":
                out[k] = " "
                if comment:
                    nocomment[k] = " "

    def fail(self, pos: int, reason: str) -> None:
        raise ParseFailure(self.path, pos, reason)

    def prev_code_char(self, i: int) -> str:
        k = i - 1
        while k >= 0 and self.out[k].isspace():
            k -= 1
        return self.out[k] if k >= 0 else ""

    def run(self) -> str:
        text, syn = self.text, self.syntax
        n = len(text)
        i = 0
        line_start = True
        while i < n:
            c = text[i]
            if c == "\n":
                i += 1
                if self.heredocs:
                    i = self.consume_heredocs(i)
                line_start = True
                continue
            if c in " \t\r\f\v":
                i += 1
                continue
            at_line_start, line_start = line_start, False

            if at_line_start and syn.preprocessor and c == "#":
                i = self.skip_to_eol(i, continuation=True, comment=False)
                continue
            if syn.ruby_block_comments and c == "=" and text.startswith("=begin", i) and (i == 0 or text[i - 1] == "\n"):
                end = text.find("\n=end", i)
                if end < 0:
                    self.fail(i, "unterminated =begin comment")
                eol = self.skip_to_eol(end + 1)
                self.blank(i, eol, comment=True)
                i = eol
                continue
            if any(text.startswith(p, i) for p in syn.line_comments):
                i = self.skip_to_eol(i)
                continue
            if syn.block_comment and text.startswith(syn.block_comment[0], i):
                i = self.skip_block_comment(i)
                continue

            j = self.literal_end(i)
            if j is not None:
                k = text.find("\n", i, j)
                while k >= 0:
                    self.literal_newlines.add(k)
                    k = text.find("\n", k + 1, j)
                self.blank(i, j)
                i = j
                continue
            i += 1
        if self.heredocs:
            self.fail(n, "unterminated heredoc")
        return "".join(self.out)

    def skip_to_eol(self, i: int, continuation: bool = False, comment: bool = True) -> int:
        text = self.text
        while True:
            j = text.find("\n", i)
            if j < 0:
                j = len(text)
            if continuation and j < len(text) and text[i:j].rstrip("\r").endswith("\\"):
                self.blank(i, j, comment=comment)
                i = j + 1
                continue
            self.blank(i, j, comment=comment)
            return j

    def skip_block_comment(self, i: int) -> int:
        open_, close = self.syntax.block_comment
        text = self.text
        depth = 0
        k = i
        while k < len(text):
            if text.startswith(open_, k) and (depth == 0 or self.syntax.nested_block_comments):
                depth += 1
                k += len(open_)
            elif text.startswith(close, k):
                depth -= 1
                k += len(close)
                if depth == 0:
                    self.blank(i, k, comment=True)
                    return k
            else:
                k += 1
        self.fail(i, "unterminated block comment")
        return k

    def literal_end(self, i: int) -> int | None:
        """End offset of a string/char/regex literal starting at ``i``, if any."""
        text, syn = self.text, self.syntax
        c = text[i]
        prev = text[i - 1] if i else ""

        if syn.rust_raw_strings and c in "br" and not _is_ident(prev):
            m = _RUST_RAW.match(text, i)
            if m:
                closing = '"' + m.group(1)
                end = text.find(closing, m.end())
                if end < 0:
                    self.fail(i, "unterminated raw string")
                return end + len(closing)
        if syn.cpp_raw_strings and c in "uULR" and not _is_ident(prev):
            m = _CPP_RAW.match(text, i)
            if m:
                closing = ")" + m.group(1) + '"'
                end = text.find(closing, m.end())
                if end < 0:
                    self.fail(i, "unterminated raw string")
                return end + len(closing)
        if syn.verbatim_strings and c in "@$":
            m = _VERBATIM.match(text, i)
            if m:
                k = m.end()
                while k < len(text):
                    if text[k] == '"':
                        if text.startswith('""', k):
                            k += 2
                            continue
                        return k + 1
                    k += 1
                self.fail(i, "unterminated verbatim string")
        if syn.heredoc == "ruby" and c == "<":
            m = _RUBY_HEREDOC.match(text, i)
            if m and (m.group(1) or m.group(2) or m.group(3).isupper()):
                self.heredocs.append(("ruby", m.group(3)))
                return m.end()
        if syn.heredoc == "php" and c == "<":
            m = _PHP_HEREDOC.match(text, i)
            if m:
                self.heredocs.append(("php", m.group(2)))
                return m.end()

        if c == '"' or (c == "'" and syn.single_quote == "string"):
            if syn.triple_quotes and text.startswith(c * 3, i):
                return self.string_end(i, c * 3, multiline=True)
            return self.string_end(i, c, multiline=syn.multiline_strings)
        if c == "'" and syn.single_quote == "char":
            m = _CHAR_LITERAL.match(text, i)
            return m.end() if m else None
        if c == "`" and syn.backtick == "raw":
            end = text.find("`", i + 1)
            if end < 0:
                self.fail(i, "unterminated raw string")
            return end + 1
        if c == "`" and syn.backtick == "template":
            return self.template_end(i)
        if c == "/" and syn.regex_literals and self.prev_code_char(i) in _REGEX_PRECEDERS | {""}:
            return self.regex_end(i)
        return None

    def string_end(self, i: int, quote: str, multiline: bool) -> int:
        text = self.text
        k = i + len(quote)
        while k < len(text):
            ch = text[k]
            if ch == "\\":
                k += 2
                continue
            if text.startswith(quote, k):
                return k + len(quote)
            if ch == "\n" and not multiline and len(quote) == 1:
                # unterminated single-line literal; stop at the line end
                return k
            k += 1
        self.fail(i, "unterminated string literal")
        return k

    def template_end(self, i: int) -> int:
        text = self.text
        k = i + 1
        depth = 0
        while k < len(text):
            ch = text[k]
            if ch == "\\":
                k += 2
                continue
            if depth == 0:
                if ch == "`":
                    return k + 1
                if text.startswith("${", k):
                    depth = 1
                    k += 2
                    continue
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
            k += 1
        self.fail(i, "unterminated template literal")
        return k

    def regex_end(self, i: int) -> int | None:
        text = self.text
        if text.startswith("//", i) or text.startswith("/*", i):
            return None
        k = i + 1
        in_class = False
        while k < len(text):
            ch = text[k]
            if ch == "\n":
                return None
            if ch == "\\":
                k += 2
                continue
            if ch == "[":
                in_class = True
            elif ch == "]":
                in_class = False
            elif ch == "/" and not in_class:
                k += 1
                while k < len(text) and text[k].isalpha():
                    k += 1
                return k
            k += 1
        return None

    def consume_heredocs(self, i: int) -> int:
        text = self.text
        for style, ident in self.heredocs:
            while True:
                if i >= len(text):
                    self.fail(i, f"unterminated heredoc {ident}")
                j = text.find("\n", i)
                j = len(text) if j < 0 else j
                line = text[i:j].strip()
                done = line == ident if style == "ruby" else re.match(re.escape(ident) + r"\b", line) is not None
                if done and style == "php":
                    # the terminator may be followed by code such as ``;``
                    start = i + text[i:j].index(ident)
                    self.blank(i, start + len(ident))
                    i = start + len(ident)
                    break
                self.blank(i, j)
                i = j + 1
                if done:
                    i = j
                    break
        self.heredocs.clear()
        return i


@dataclass(frozen=True)
class Masked:
    text: str
    without_comments: str
    literal_newlines: frozenset[int]


def lex(text: str, language: LanguageId, path: str = "<memory>") -> Masked:
    """Mask ``text`` and report which newlines fall inside literals."""
    syntax = SYNTAX.get(language)
    if syntax is None:
        raise ValueError(f"no lexical syntax registered for {language}")
    masker = _Masker(text, syntax, path)
    masked = masker.run()
    return Masked(masked, "".join(masker.nocomment), frozenset(masker.literal_newlines))


def mask(text: str, language: LanguageId, path: str = "<memory>") -> str:
    """Return ``text`` with comments and literals replaced by spaces."""
    return lex(text, language, path).text
