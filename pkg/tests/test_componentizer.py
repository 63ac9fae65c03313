"""Decomposition into components: structural invariants, oracles and fallback."""

from __future__ import annotations

import ast
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from malscan.componentizer import (
    ComponentKind,
    ParseFailure,
    SourceFile,
    Span,
    component_id,
    decompose,
    fallback_fragment,
)
from malscan.languages import EXTENSIONS, LanguageId, detect_language

from .conftest import GOLDEN, LANG_FIXTURES

FIXTURE_FILES = sorted(p for p in LANG_FIXTURES.rglob("*") if p.is_file())


def _load(path: Path) -> SourceFile:
    return SourceFile.from_bytes(str(path.relative_to(LANG_FIXTURES)), path.read_bytes())


def check_invariants(file: SourceFile, components) -> None:
    """Every structural guarantee a decomposition must satisfy."""
    data = file.data
    by_id = {c.id: c for c in components}
    assert len(by_id) == len(components), "ids must be unique"
    assert [c.span.start for c in components] == sorted(c.span.start for c in components)
    for c in components:
        assert 0 <= c.span.start < c.span.end <= len(data)
        assert c.source.encode("utf-8", errors="surrogateescape") == data[c.span.start:c.span.end]
        assert c.id == component_id(file.path, c.span, c.kind)
        assert c.start_line == data.count(b"\n", 0, c.span.start) + 1
        if c.parent_id is not None:
            assert by_id[c.parent_id].span.contains(c.span)
    levels: dict = {}
    for c in components:
        levels.setdefault(c.parent_id, []).append(c.span)
    for spans in levels.values():
        spans.sort()
        for a, b in zip(spans, spans[1:]):
            assert a.end <= b.start, f"overlap at one nesting level: {a} {b}"
    cursor = 0
    for span in levels.get(None, []) + [Span(len(data), len(data))]:
        gap = data[cursor:span.start].decode("utf-8", errors="surrogateescape")
        assert not gap.strip(), f"uncovered text at byte {cursor}: {gap!r}"
        cursor = max(cursor, span.end)


def test_fixture_suite_has_three_files_per_language():
    for lang in LanguageId:
        if lang is LanguageId.UNKNOWN:
            continue
        files = [p for p in FIXTURE_FILES if detect_language(p.name) is lang]
        assert len(files) >= 3, lang


@pytest.mark.parametrize("path", FIXTURE_FILES, ids=lambda p: str(p.relative_to(LANG_FIXTURES)))
def test_fixture_invariants(path):
    file = _load(path)
    components = decompose(file)
    assert components
    check_invariants(file, components)
    assert decompose(_load(path)) == components


def test_fixture_snapshot():
    expected = json.loads((GOLDEN / "fixture_components.json").read_text(encoding="utf-8"))
    actual = {}
    for path in FIXTURE_FILES:
        file = _load(path)
        cs = decompose(file)
        names = {c.id: c.name for c in cs}
        actual[file.path] = [[c.kind.value, c.name, c.start_line, c.end_line, names.get(c.parent_id)] for c in cs]
    assert actual == expected


@pytest.mark.parametrize("path", sorted((LANG_FIXTURES / "python").glob("*.py")), ids=lambda p: p.name)
def test_python_matches_ast_oracle(path):
    text = path.read_text(encoding="utf-8")
    tree = ast.parse(text)
    want = []
    for node in tree.body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            first = min([node.lineno] + [d.lineno for d in node.decorator_list])
            kind = "class" if isinstance(node, ast.ClassDef) else "function"
            want.append((kind, node.name, first, node.end_lineno))
            if isinstance(node, ast.ClassDef):
                for sub in node.body:
                    if isinstance(sub, (ast.FunctionDef, ast.AsyncFunctionDef)):
                        first = min([sub.lineno] + [d.lineno for d in sub.decorator_list])
                        want.append(("method", sub.name, first, sub.end_lineno))
    got = [(c.kind.value, c.name, c.start_line, c.end_line)
           for c in decompose(_load(path)) if c.kind is not ComponentKind.MODULE_FRAGMENT]
    assert got == want


def test_empty_file():
    assert decompose(SourceFile.from_text("a.py", "")) == []
    assert fallback_fragment(SourceFile.from_text("a.py", ""), 10) == []


def test_two_top_level_functions():
    text = "def a():\n    return 1\n\n\ndef b():\n    return 2\n"
    cs = decompose(SourceFile.from_text("m.py", text))
    assert [(c.kind, c.name) for c in cs] == [(ComponentKind.FUNCTION, "a"), (ComponentKind.FUNCTION, "b")]
    # "def a():\n" is 9 bytes, "    return 1" is 12 more; b starts after two blank lines
    assert cs[0].span == Span(0, 21)
    assert cs[1].span == Span(24, 45)


def test_class_with_two_methods():
    text = "class K:\n    def m1(self):\n        pass\n\n    def m2(self):\n        pass\n"
    cs = decompose(SourceFile.from_text("k.py", text))
    cls, m1, m2 = cs
    assert cls.kind is ComponentKind.CLASS and cls.name == "K"
    assert [m1.name, m2.name] == ["m1", "m2"]
    assert m1.parent_id == cls.id and m2.parent_id == cls.id
    assert cls.span.contains(m1.span) and cls.span.contains(m2.span)


def test_brace_language_two_functions():
    text = "int a(void) { return 1; }\n\nint b(int x) {\n  return x;\n}\n"
    cs = decompose(SourceFile.from_text("m.c", text))
    assert [(c.kind.value, c.name, c.start_line, c.end_line) for c in cs] == [
        ("function", "a", 1, 1), ("function", "b", 3, 5)]


def test_residual_statements_become_fragments():
    text = "import os\nX = 1\n\ndef f():\n    pass\n\nprint(f())\n"
    cs = decompose(SourceFile.from_text("s.py", text))
    kinds = [(c.kind.value, c.start_line) for c in cs]
    assert kinds == [("module_fragment", 1), ("function", 4), ("module_fragment", 7)]


def test_unbalanced_braces_raise_parse_failure():
    with pytest.raises(ParseFailure):
        decompose(SourceFile.from_text("x.c", "int f() {\n  if (x) {\n"))


def test_unknown_language_uses_fragments():
    file = SourceFile.from_text("notes.xyz", "alpha\n\nbeta\n")
    assert file.language is LanguageId.UNKNOWN
    cs = decompose(file)
    assert [c.kind for c in cs] == [ComponentKind.MODULE_FRAGMENT]
    assert "".join(c.source for c in cs) == file.content


def test_ids_depend_on_path_span_and_kind():
    a = component_id("a.py", Span(0, 5), ComponentKind.FUNCTION)
    assert a == component_id("a.py", Span(0, 5), ComponentKind.FUNCTION)
    assert a != component_id("b.py", Span(0, 5), ComponentKind.FUNCTION)
    assert a != component_id("a.py", Span(0, 6), ComponentKind.FUNCTION)
    assert a != component_id("a.py", Span(0, 5), ComponentKind.CLASS)


def test_invalid_utf8_is_replaced_with_warning():
    file = SourceFile.from_bytes("a.py", b"x = '\xff'\n")
    assert "\ufffd" in file.content
    assert file.warnings and "invalid UTF-8" in file.warnings[0]


def test_content_hash_is_pure():
    assert SourceFile.from_text("a.py", "x").content_hash == SourceFile.from_text("b.go", "x").content_hash


# -- language detection -----------------------------------------------------------


def test_detect_language():
    assert detect_language("a.py") is LanguageId.PYTHON
    assert detect_language("a.xyz") is LanguageId.UNKNOWN
    assert detect_language("a.xyz", LanguageId.GO) is LanguageId.GO
    assert detect_language("a.xyz", "go") is LanguageId.GO


def test_registry_has_fourteen_languages():
    named = [lang for lang in LanguageId if lang is not LanguageId.UNKNOWN]
    assert len(named) == 14
    assert set(EXTENSIONS.values()) == set(named)


# -- fallback ---------------------------------------------------------------------


def test_fallback_single_chunk():
    file = SourceFile.from_text("a.txt", "0123456789")
    (frag,) = fallback_fragment(file, 100)
    assert frag.span == Span(0, 10)


def test_fallback_splits_at_blank_line():
    text = "a" * 120 + "\n\n" + "b" * 127 + "\n"
    assert len(text) == 250
    frags = fallback_fragment(SourceFile.from_text("a.txt", text), 128)
    assert [f.span for f in frags] == [Span(0, 122), Span(122, 250)]
    assert "".join(f.source for f in frags) == text


def test_fallback_rejects_nonpositive_size():
    with pytest.raises(ValueError):
        fallback_fragment(SourceFile.from_text("a.txt", "x"), 0)


def test_fallback_never_splits_a_utf8_character():
    text = "é" * 50
    frags = fallback_fragment(SourceFile.from_text("a.txt", text), 7)
    assert "".join(f.source for f in frags) == text
    assert all(len(f.source_bytes) <= 7 for f in frags)


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=2048), st.integers(min_value=1, max_value=300))
def test_fallback_totality_on_raw_bytes(data, max_bytes):
    file = SourceFile("blob.bin", LanguageId.UNKNOWN, data.decode("utf-8", errors="surrogateescape"), "x")
    frags = fallback_fragment(file, max_bytes)
    assert b"".join(f.source_bytes for f in frags) == data
    assert all(0 < len(f.source_bytes) <= max_bytes for f in frags)


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=600), st.sampled_from(["a.py", "a.js", "a.c", "a.rb", "a.go", "a.rs"]))
def test_decompose_invariants_on_random_text(text, path):
    file = SourceFile.from_text(path, text)
    try:
        components = decompose(file)
    except ParseFailure:
        components = fallback_fragment(file, 64)
    check_invariants(file, components)
