"""Static indicator rules and the CVSS-based triage score.

Rules live in a YAML document::

    rules:
      - rule_id: sqli-string-build
        category: sql_injection
        languages: [python, java]
        pattern: '\\b(?:execute|executeQuery)\\s*\\('
        context_pattern: '"\\s*\\+'
        vector: CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:N
        description: SQL statement built by string concatenation

A rule fires once per ``pattern`` match site, and only when
``context_pattern`` (if given) matches somewhere in the same component.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterable, Optional, Sequence

import regex
import yaml

from .componentizer import CodeComponent, ParseFailure, Span
from .componentizer.lexer import lex
from .cvss import CvssScore, CvssVector, MalformedVector, ZERO, base_score, parse_vector
from .languages import LanguageId

logger = logging.getLogger(__name__)

DEFAULT_FLAG_THRESHOLD = 4.0
EXCERPT_BYTES = 200
PATTERN_TIMEOUT = 1.0  # seconds per rule per component

_FIELDS = ("rule_id", "category", "languages", "pattern", "context_pattern", "vector", "description")
_REQUIRED = ("rule_id", "category", "pattern", "vector", "description")


class VulnCategory(str, Enum):
    SQL_INJECTION = "sql_injection"
    CROSS_SITE_SCRIPTING = "cross_site_scripting"
    REMOTE_CODE_EXECUTION = "remote_code_execution"
    COMMAND_INJECTION = "command_injection"
    PATH_TRAVERSAL = "path_traversal"
    INSECURE_DESERIALIZATION = "insecure_deserialization"
    HARDCODED_CREDENTIALS = "hardcoded_credentials"
    BACKDOOR = "backdoor"
    LOGIC_BOMB = "logic_bomb"
    PRIVILEGE_ESCALATION = "privilege_escalation"

    @property
    def title(self) -> str:
        return _TITLES[self]


_TITLES = {
    VulnCategory.SQL_INJECTION: "SQL Injection",
    VulnCategory.CROSS_SITE_SCRIPTING: "Cross-Site Scripting",
    VulnCategory.REMOTE_CODE_EXECUTION: "Remote Code Execution",
    VulnCategory.COMMAND_INJECTION: "Command Injection",
    VulnCategory.PATH_TRAVERSAL: "Path Traversal",
    VulnCategory.INSECURE_DESERIALIZATION: "Insecure Deserialization",
    VulnCategory.HARDCODED_CREDENTIALS: "Hardcoded Credentials",
    VulnCategory.BACKDOOR: "Backdoor",
    VulnCategory.LOGIC_BOMB: "Logic Bomb",
    VulnCategory.PRIVILEGE_ESCALATION: "Privilege Escalation",
}


class RuleLoadError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class IndicatorRule:
    rule_id: str
    category: VulnCategory
    languages: frozenset[LanguageId]
    pattern: str
    context_pattern: Optional[str]
    vector: CvssVector
    description: str
    compiled: regex.Pattern = field(compare=False, repr=False)
    compiled_context: Optional[regex.Pattern] = field(default=None, compare=False, repr=False)

    def applies_to(self, language: LanguageId) -> bool:
        return not self.languages or language in self.languages


@dataclass(frozen=True)
class Indicator:
    rule_id: str
    category: VulnCategory
    span: Span  # bytes, relative to the component source
    excerpt: str
    vector: CvssVector

    @property
    def score(self) -> CvssScore:
        return base_score(self.vector)


@dataclass(frozen=True)
class PrescoreResult:
    component_id: str
    indicators: tuple[Indicator, ...]
    score: CvssScore
    flagged: bool
    warnings: tuple[str, ...] = ()


def _with_word_bounds(pattern: str) -> str:
    # Word-boundary semantics: an identifier-like edge must not run into a
    # neighbouring identifier. Edges that are punctuation are left alone.
    out = pattern
    if out[:1].isalnum() or out[:1] == "_":
        out = r"(?<![\w$])" + out
    if out[-1:].isalnum() or out[-1:] == "_":
        out = out + r"(?![\w$])"
    return out


def _compile(pattern: str, line: int, what: str) -> regex.Pattern:
    try:
        return regex.compile(_with_word_bounds(pattern), regex.MULTILINE | regex.VERSION0)
    except regex.error as exc:
        raise RuleLoadError(line, f"{what} does not compile: {exc}") from None


def _yaml_line(exc: yaml.YAMLError) -> int:
    mark = getattr(exc, "problem_mark", None) or getattr(exc, "context_mark", None)
    return mark.line + 1 if mark else 1


def load_rules(source: str) -> list[IndicatorRule]:
    """Parse a rule document. Either every rule loads or RuleLoadError is raised."""
    try:
        root = yaml.compose(source, Loader=yaml.SafeLoader)
        data = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise RuleLoadError(_yaml_line(exc), f"invalid YAML: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        return []
    if not isinstance(data, dict) or set(data) - {"rules", "version"}:
        raise RuleLoadError(1, "expected a mapping with a 'rules' list")
    entries = data.get("rules") or []
    if not isinstance(entries, list):
        raise RuleLoadError(1, "'rules' must be a list")
    rules_node = next(v for k, v in root.value if k.value == "rules")
    nodes = rules_node.value if isinstance(rules_node, yaml.SequenceNode) else []

    rules: list[IndicatorRule] = []
    seen: dict[str, int] = {}
    for entry, node in zip(entries, nodes):
        line = node.start_mark.line + 1
        rule = _rule_from_entry(entry, line)
        if rule.rule_id in seen:
            raise RuleLoadError(line, f"duplicate rule_id {rule.rule_id!r} (first defined on line {seen[rule.rule_id]})")
        seen[rule.rule_id] = line
        rules.append(rule)
    return rules


def _rule_from_entry(entry, line: int) -> IndicatorRule:
    if not isinstance(entry, dict):
        raise RuleLoadError(line, "rule must be a mapping")
    unknown = sorted(set(entry) - set(_FIELDS))
    if unknown:
        raise RuleLoadError(line, f"unknown field(s): {', '.join(map(str, unknown))}")
    for name in _REQUIRED:
        value = entry.get(name)
        if not isinstance(value, str) or not value.strip():
            raise RuleLoadError(line, f"field {name!r} must be a non-empty string")
    try:
        category = VulnCategory(entry["category"])
    except ValueError:
        raise RuleLoadError(line, f"unknown category {entry['category']!r}") from None
    languages = entry.get("languages") or []
    if not isinstance(languages, list):
        raise RuleLoadError(line, "'languages' must be a list")
    try:
        langs = frozenset(LanguageId.parse(str(x)) for x in languages)
    except ValueError as exc:
        raise RuleLoadError(line, str(exc)) from None
    if LanguageId.UNKNOWN in langs:
        raise RuleLoadError(line, "'unknown' is not a rule language")
    try:
        vector = parse_vector(entry["vector"])
    except MalformedVector as exc:
        raise RuleLoadError(line, str(exc)) from None
    context = entry.get("context_pattern")
    if context is not None and (not isinstance(context, str) or not context):
        raise RuleLoadError(line, "'context_pattern' must be a non-empty string when present")
    return IndicatorRule(
        rule_id=entry["rule_id"],
        category=category,
        languages=langs,
        pattern=entry["pattern"],
        context_pattern=context,
        vector=vector,
        description=entry["description"].strip(),
        compiled=_compile(entry["pattern"], line, "pattern"),
        compiled_context=_compile(context, line, "context_pattern") if context else None,
    )


def load_rules_file(path) -> list[IndicatorRule]:
    with open(path, encoding="utf-8") as fh:
        return load_rules(fh.read())


def bundled_rules_text() -> str:
    return resources.files("malscan").joinpath("data/rules.yaml").read_text(encoding="utf-8")


def bundled_rules() -> list[IndicatorRule]:
    return load_rules(bundled_rules_text())


def rules_digest(rules: Sequence[IndicatorRule]) -> str:
    h = hashlib.sha256()
    for r in sorted(rules, key=lambda r: r.rule_id):
        fields = (r.rule_id, r.category.value, ",".join(sorted(x.value for x in r.languages)),
                  r.pattern, r.context_pattern or "", r.vector.render(), r.description)
        h.update("\x1f".join(fields).encode("utf-8"))
        h.update(b"\x1e")
    return h.hexdigest()


def _truncate(text: str, limit: int = EXCERPT_BYTES) -> str:
    data = text.encode("utf-8", errors="surrogateescape")
    if len(data) <= limit:
        return text
    return data[:limit].decode("utf-8", errors="ignore")


def _searchable(component: CodeComponent) -> str:
    """Component source with comments blanked; literals stay visible."""
    if component.language is LanguageId.UNKNOWN:
        return component.source
    try:
        return lex(component.source, component.language, component.path).without_comments
    except ParseFailure:
        # chunked fragments can start inside a literal or comment
        return component.source


class _ByteOffsets:
    def __init__(self, text: str):
        self.text = text
        self.ascii = text.isascii()

    def __call__(self, char_offset: int) -> int:
        if self.ascii:
            return char_offset
        return len(self.text[:char_offset].encode("utf-8", errors="surrogateescape"))


def prescore(
    component: CodeComponent,
    rules: Iterable[IndicatorRule],
    flag_threshold: float = DEFAULT_FLAG_THRESHOLD,
    exclude: Sequence[Span] = (),
    timeout: float = PATTERN_TIMEOUT,
) -> PrescoreResult:
    """Match ``rules`` against ``component`` and compute its triage score.

    ``exclude`` holds byte ranges of the component source that belong to
    child components; matches wholly inside them are left to the children.
    """
    text = _searchable(component)
    to_bytes = _ByteOffsets(component.source)
    indicators: list[Indicator] = []
    warnings: list[str] = []
    for rule in rules:
        if not rule.applies_to(component.language):
            continue
        try:
            if rule.compiled_context is not None and rule.compiled_context.search(text, timeout=timeout) is None:
                continue
            for m in rule.compiled.finditer(text, timeout=timeout):
                if m.end() == m.start():
                    continue
                span = Span(to_bytes(m.start()), to_bytes(m.end()))
                if any(ex.contains(span) for ex in exclude):
                    continue
                excerpt = _truncate(component.source[m.start():m.end()])
                indicators.append(Indicator(rule.rule_id, rule.category, span, excerpt, rule.vector))
        except TimeoutError:
            msg = f"rule {rule.rule_id} timed out on component {component.id}; skipped"
            logger.warning(msg)
            warnings.append(msg)
            indicators = [i for i in indicators if i.rule_id != rule.rule_id]
    indicators.sort(key=lambda i: (i.span.start, i.rule_id, i.span.end))
    score = max((i.score for i in indicators), key=lambda s: s.value, default=ZERO)
    return PrescoreResult(component.id, tuple(indicators), score, score.value >= flag_threshold, tuple(warnings))
