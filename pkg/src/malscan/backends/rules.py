"""Deterministic backend that turns triage indicators into findings.

Every category has a fixed playbook (explanation, attack steps, impact,
remediation). The backend only reflects indicators it is given, so a
component without indicators always yields zero findings.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from ..componentizer import CodeComponent, ComponentKind, ParseFailure
from ..componentizer.lexer import mask
from ..languages import LanguageId
from ..prescore import Indicator, IndicatorRule, VulnCategory
from . import templates
from .base import (
    AnalysisBackend,
    BackendRequest,
    BudgetExceeded,
    Confidence,
    DetectionReport,
    ExploitTrace,
    Finding,
    Remediation,
)

BACKEND_ID = "rules"


@dataclass(frozen=True)
class _Playbook:
    explanation: str
    entry: Optional[str]  # fixed entry point; None means "the tainted input"
    steps: tuple[str, ...]
    impact: str
    recommendation: str
    note: str


# Placeholders: {name} component name, {kind} component kind, {input} the
# tainted parameter (or "untrusted input"), {sink} the matched code, {line}.
PLAYBOOKS: dict[VulnCategory, _Playbook] = {
    VulnCategory.SQL_INJECTION: _Playbook(
        "{kind} `{name}` builds SQL text from {input} and executes it, so quotes in the value change the statement.",
        None,
        (
            "Supply {input} containing a quote followed by SQL, for example `' OR '1'='1`.",
            "The value is spliced into the query text inside `{name}`.",
            "The database runs the altered statement at `{sink}` (line {line}).",
        ),
        "Reads or modifies rows outside the caller's authorisation; may drop or corrupt tables.",
        "Use parameterized queries: keep the SQL text constant and bind {input} through placeholders instead of concatenation.",
        "Bound parameters produce the same query results for legitimate values; only the quoting changes.",
    ),
    VulnCategory.CROSS_SITE_SCRIPTING: _Playbook(
        "{kind} `{name}` writes {input} into HTML without escaping.",
        None,
        (
            "Send {input} containing a `<script>` payload.",
            "`{name}` places the value into markup at `{sink}` (line {line}).",
            "A victim's browser renders the page and executes the injected script.",
        ),
        "Session theft and actions performed as the victim inside the application origin.",
        "HTML-escape {input} before output or render it through an auto-escaping template; set text content instead of HTML.",
        "Escaped text displays identically for ordinary values.",
    ),
    VulnCategory.REMOTE_CODE_EXECUTION: _Playbook(
        "{kind} `{name}` evaluates a runtime string as code.",
        None,
        (
            "Provide {input} containing an expression in the host language.",
            "`{name}` hands the string to the evaluator at `{sink}` (line {line}).",
            "The expression runs with the privileges of the application process.",
        ),
        "Arbitrary code execution on the server.",
        "Remove dynamic evaluation; parse the expected data explicitly (a literal parser or a table of allowed operations).",
        "A dedicated parser accepts the same well-formed inputs while rejecting code.",
    ),
    VulnCategory.COMMAND_INJECTION: _Playbook(
        "{kind} `{name}` passes {input} to a shell command line.",
        None,
        (
            "Supply {input} with a shell metacharacter such as `; id`.",
            "`{name}` concatenates the value into the command at `{sink}` (line {line}).",
            "The shell runs the attacker's extra command.",
        ),
        "Arbitrary OS command execution as the service account.",
        "Run the program without a shell using an argument list, and validate {input} against an allow-list.",
        "Argument-list execution runs the same program with the same arguments for legitimate values.",
    ),
    VulnCategory.PATH_TRAVERSAL: _Playbook(
        "{kind} `{name}` opens a file path derived from {input} without confining it to a base directory.",
        None,
        (
            "Request a path such as `../../etc/passwd` through {input}.",
            "`{name}` joins the value onto the base path and opens it at `{sink}` (line {line}).",
            "The file outside the intended directory is read or written.",
        ),
        "Disclosure or overwrite of arbitrary files readable by the process.",
        "Canonicalise the joined path and reject it unless it stays inside the intended base directory.",
        "Files inside the base directory resolve exactly as before.",
    ),
    VulnCategory.INSECURE_DESERIALIZATION: _Playbook(
        "{kind} `{name}` deserialises external data with a loader that can construct arbitrary objects.",
        None,
        (
            "Craft a serialised payload whose object graph triggers code on load and deliver it via {input}.",
            "`{name}` feeds the bytes to `{sink}` (line {line}).",
            "Object construction runs the attacker's gadget chain.",
        ),
        "Code execution or object injection inside the application process.",
        "Switch to a data-only format such as JSON or a safe loader, and authenticate serialised payloads before decoding.",
        "Plain data round-trips through JSON or a safe loader unchanged.",
    ),
    VulnCategory.HARDCODED_CREDENTIALS: _Playbook(
        "{kind} `{name}` embeds a secret as a string literal.",
        "source code or build artefacts containing `{name}`",
        (
            "Obtain the source, a package or a decompiled binary.",
            "Read the literal at `{sink}` (line {line}).",
            "Authenticate to the protected service with the recovered secret.",
        ),
        "Unauthorised access to whatever the credential protects.",
        "Load the secret at runtime from the environment or a secrets manager, then rotate the exposed value.",
        "The code path receives the same value, now supplied by configuration.",
    ),
    VulnCategory.BACKDOOR: _Playbook(
        "{kind} `{name}` grants access when a value matches a hardcoded constant.",
        "the authentication check in `{name}`",
        (
            "Learn the magic value from the source or a binary.",
            "Send it so the comparison at `{sink}` (line {line}) succeeds.",
            "Skip the normal credential check and act as a privileged user.",
        ),
        "Full authentication bypass.",
        "Remove the hardcoded comparison and route every login through the regular credential verification.",
        "Legitimate users authenticate through the unchanged normal path.",
    ),
    VulnCategory.LOGIC_BOMB: _Playbook(
        "{kind} `{name}` runs a destructive operation only when a date or time condition holds.",
        "the date/time condition in `{name}`",
        (
            "Wait for, or move the clock to, the trigger date.",
            "The guarded branch in `{name}` becomes reachable.",
            "The destructive call at `{sink}` (line {line}) executes.",
        ),
        "Deletion or corruption of data and loss of availability.",
        "Remove the time-triggered destructive branch; destructive maintenance must be explicit, authorised and logged.",
        "Normal processing is unaffected because the branch never runs in regular operation.",
    ),
    VulnCategory.PRIVILEGE_ESCALATION: _Playbook(
        "{kind} `{name}` raises privileges or permissions beyond what the caller holds.",
        None,
        (
            "Reach `{name}` through {input}.",
            "The privilege change at `{sink}` (line {line}) takes effect.",
            "Use the elevated rights for actions the account should not perform.",
        ),
        "Elevation to administrative or root privileges.",
        "Apply least privilege: never take roles or permission bits from client input, avoid world-writable modes and setuid(0).",
        "Authorised operations keep working under the minimum required rights.",
    ),
}

_NAME_FIRST = {
    LanguageId.PYTHON, LanguageId.GO, LanguageId.RUST, LanguageId.JAVASCRIPT, LanguageId.TYPESCRIPT,
    LanguageId.KOTLIN, LanguageId.SCALA, LanguageId.SWIFT, LanguageId.RUBY, LanguageId.PHP,
}
_IGNORED_PARAMS = {"self", "cls", "this", "mut"}
_IDENT = re.compile(r"\$?[A-Za-z_][\w]*")

_ENV_LOOKUP = {
    LanguageId.PYTHON: 'os.environ["{env}"]',
    LanguageId.JAVASCRIPT: "process.env.{env}",
    LanguageId.TYPESCRIPT: "process.env.{env}",
    LanguageId.JAVA: 'System.getenv("{env}")',
    LanguageId.KOTLIN: 'System.getenv("{env}")',
    LanguageId.SCALA: 'sys.env("{env}")',
    LanguageId.C: 'getenv("{env}")',
    LanguageId.CPP: 'std::getenv("{env}")',
    LanguageId.CSHARP: 'Environment.GetEnvironmentVariable("{env}")',
    LanguageId.GO: 'os.Getenv("{env}")',
    LanguageId.RUST: 'std::env::var("{env}").unwrap_or_default()',
    LanguageId.PHP: "getenv('{env}')",
    LanguageId.RUBY: 'ENV.fetch("{env}")',
    LanguageId.SWIFT: 'ProcessInfo.processInfo.environment["{env}"] ?? ""',
}
_CRED_ASSIGN = re.compile(r"""([\w$]+)(["']?\s*(?::=|=>|=|:)\s*)(["'])[^"'\s]{4,}\3""")


def _split_top_level(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([{<":
            depth += 1
        elif ch in ")]}>":
            depth = max(0, depth - 1)
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p for p in parts if p.strip()]


def parameters(component: CodeComponent) -> list[str]:
    """Best-effort list of declared parameter names for functions and methods."""
    if component.kind not in (ComponentKind.FUNCTION, ComponentKind.METHOD):
        return []
    try:
        code = mask(component.source, component.language, component.path)
    except (ParseFailure, ValueError):
        code = component.source
    short = re.split(r"[.:]+", component.name)[-1]
    m = re.search(
        re.escape(short) + r"\s*(?:<[^()]*>|\[[^()]*\])?\s*(?:=\s*(?:async\s*)?(?:function\s*\w*\s*)?)?\(", code
    )
    if not m:
        return []
    start = m.end()
    depth, k = 1, start
    while k < len(code) and depth:
        depth += {"(": 1, ")": -1}.get(code[k], 0)
        k += 1
    if depth:
        return []
    names = []
    for raw in _split_top_level(component.source[start:k - 1]):
        p = re.split(r"(?<![=!<>])=(?![=>])", raw, maxsplit=1)[0]
        if component.language in _NAME_FIRST and component.language is not LanguageId.GO:
            p = p.split(":", 1)[0]
        idents = [i for i in _IDENT.findall(p.replace("...", " ")) if i not in _IGNORED_PARAMS]
        if not idents:
            continue
        name = idents[0] if component.language is LanguageId.GO else idents[-1]
        names.append(name)
    return names


def _word(name: str) -> re.Pattern:
    return re.compile(r"(?<![\w$])" + re.escape(name) + r"(?![\w$])")


_ASSIGN = re.compile(r"\s*(?:[\w$<>\[\]*&]+\s+)*(\$?\w+)\s*(?::[^=\n]+)?[-+.|]?=(?!=)(.*)")


_REQUEST_SOURCE = re.compile(
    r"""(?<![\w$])(?:request\.(?:args|form|values|cookies|headers|json|files|data|GET|POST)"""
    r"""(?:\.get\(\s*["'][^"']*["'][^()\n]*\)|\[["'][^"']*["']\])?"""
    r"""|req\.(?:query|params|body|headers|cookies)(?:\.[\w$]+|\[["'][^"']*["']\])?"""
    r"""|\$_(?:GET|POST|REQUEST|COOKIE|FILES)(?:\[["'][^"']*["']\])?"""
    r"""|[\w$.]*getParameter\(\s*"[^"]*"\s*\)"""
    r"""|params\[:?["']?\w+["']?\])"""
)


def _call_args(text: str) -> str:
    """Drop the callee and receiver so ``res.send(x)`` does not taint ``res``."""
    m = re.match(r"[\w$.:>-]*\s*\(", text)
    return text[m.end():] if m else text


def tainted_inputs(component: CodeComponent, sites: Sequence[tuple[int, int]]) -> tuple[str, list[str]]:
    """Find what flows into the match sites.

    ``sites`` holds 0-based (line, column) positions of indicator matches.
    The argument text of each match is searched first, then the right-hand
    sides of assignments feeding it, a few hops back. Request accessors win
    over parameters at the same hop. Returns ``("request", [expr])``,
    ``("parameter", names)`` or ``("", [])``.
    """
    params = parameters(component)
    lines = component.source.split("\n")
    # parameters are declared on the header; only look at the body
    body_from = 1 if len(lines) > 1 else 0
    texts = [_call_args(lines[i][col:]) for i, col in sorted(set(sites))]
    seen: set[str] = set()
    for _ in range(4):
        for text in texts:
            m = _REQUEST_SOURCE.search(text)
            if m:
                return "request", [m.group(0)]
        found = [p for p in params if any(_word(p).search(t) for t in texts)]
        if found:
            return "parameter", found
        idents = {w for t in texts for w in _IDENT.findall(t)} - seen
        seen |= idents
        texts = []
        for line in lines[body_from:]:
            m = _ASSIGN.match(line)
            if m and (m.group(1) in idents or "$" + m.group(1) in idents):
                texts.append(m.group(2))
        if not texts:
            break
    body = "\n".join(lines[body_from:])
    m = _REQUEST_SOURCE.search(body)
    if m:
        return "request", [m.group(0)]
    for p in params:
        if _word(p).search(body):
            return "parameter", [p]
    return "", []


def tainted_parameter(component: CodeComponent, sites: Sequence[tuple[int, int]]) -> Optional[str]:
    kind, names = tainted_inputs(component, sites)
    return names[0] if kind == "parameter" else None


def _describe_input(kind: str, names: list[str]) -> str:
    if kind == "request":
        return f"request input `{names[0]}`"
    if kind == "parameter":
        quoted = [f"`{n}`" for n in names]
        if len(quoted) == 1:
            return f"parameter {quoted[0]}"
        return f"parameters {', '.join(quoted[:-1])} and {quoted[-1]}"
    return "untrusted input"


def _env_name(var: str) -> str:
    var = var.lstrip("$")
    return re.sub(r"(?<=[a-z0-9])(?=[A-Z])", "_", var).upper()


def _credential_patch(component: CodeComponent, line_text: str) -> Optional[str]:
    lookup = _ENV_LOOKUP.get(component.language)
    m = _CRED_ASSIGN.search(line_text)
    if not lookup or not m:
        return None
    replacement = m.group(1) + m.group(2) + lookup.format(env=_env_name(m.group(1)))
    return (line_text[:m.start()] + replacement + line_text[m.end():]).strip()


def _line_col(data: bytes, offset: int) -> tuple[int, int]:
    line_start = data.rfind(b"\n", 0, offset) + 1
    col = len(data[line_start:offset].decode("utf-8", errors="surrogateescape"))
    return data.count(b"\n", 0, offset), col


def _canonical_digest(payload: dict) -> str:
    data = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(data.encode("utf-8")).hexdigest()


class RuleBackend(AnalysisBackend):
    """Offline backend: deterministic summaries and playbook findings."""

    backend_id = BACKEND_ID

    def __init__(self, rules: Iterable[IndicatorRule] = ()):
        self._context_rules = {r.rule_id for r in rules if r.context_pattern}
        self.template_version = templates.template_version()

    def _check_budget(self, req: BackendRequest) -> None:
        tokens = templates.prompt_tokens(req)
        if tokens > req.token_budget:
            raise BudgetExceeded(tokens, req.token_budget)

    # -- phase 1 ----------------------------------------------------------------

    def summarize(self, req: BackendRequest) -> str:
        self._check_budget(req)
        c = req.component
        lines = f"lines {c.start_line}-{c.end_line}"
        if not c.source.strip():
            return f"Empty {c.kind.value.replace('_', ' ')} in {c.path} ({lines}) with no executable code."
        if c.kind is ComponentKind.CLASS:
            return f"Class `{c.name}` in {c.path} ({c.language.value}, {lines}) groups related state and behaviour."
        if c.kind is ComponentKind.MODULE_FRAGMENT:
            count = sum(1 for l in c.source.splitlines() if l.strip())
            return (f"Module-level code in {c.path} ({c.language.value}, {lines}) with {count} non-blank "
                    f"line{'s' if count != 1 else ''} of declarations and top-level statements.")
        params = parameters(c)
        kind = "Method" if c.kind is ComponentKind.METHOD else "Function"
        takes = f"takes {', '.join(params)}" if params else "takes no parameters"
        tail = " and returns a result." if re.search(r"(?<![\w$])return(?![\w$])", c.source) else "."
        return f"{kind} `{c.name}` in {c.path} ({c.language.value}, {lines}) {takes}{tail}"

    # -- phase 2 ----------------------------------------------------------------

    def analyze(self, req: BackendRequest) -> DetectionReport:
        self._check_budget(req)
        c = req.component
        source_bytes = c.source_bytes
        by_category: dict[VulnCategory, list[Indicator]] = {}
        for ind in req.indicators:
            by_category.setdefault(ind.category, []).append(ind)

        findings = []
        lines = c.source.split("\n")
        for category in sorted(by_category, key=lambda cat: cat.value):
            group = by_category[category]
            lead = max(group, key=lambda i: (i.score.value, -i.span.start))
            sites = [_line_col(source_bytes, i.span.start) for i in group]
            lead_idx = _line_col(source_bytes, lead.span.start)[0]
            line_text = lines[lead_idx]
            source_kind, names = tainted_inputs(c, sites)
            described = _describe_input(source_kind, names)
            book = PLAYBOOKS[category]
            sink = " ".join(lead.excerpt.split())
            if len(sink) > 80:
                sink = sink[:77] + "..."
            values = {
                "name": c.name,
                "kind": c.kind.value.replace("_", " ").capitalize(),
                "input": described,
                "sink": sink,
                "line": c.start_line + lead_idx,
            }
            if book.entry is not None:
                entry = book.entry.format(**values)
            elif source_kind:
                entry = f"{described} of `{c.name}`" if source_kind == "parameter" else f"{described} in `{c.name}`"
            else:
                entry = f"untrusted input reaching `{c.name}`"
            patch = _credential_patch(c, line_text) if category is VulnCategory.HARDCODED_CREDENTIALS else None
            confident = len(group) > 1 or any(i.rule_id in self._context_rules for i in group)
            findings.append(
                Finding(
                    category=category,
                    title=f"{category.title} in {c.name}",
                    explanation=book.explanation.format(**values),
                    severity_vector=lead.vector,
                    exploit_trace=ExploitTrace(entry, tuple(s.format(**values) for s in book.steps),
                                               book.impact.format(**values)),
                    remediation=Remediation(book.recommendation.format(**values), patch, book.note.format(**values)),
                    confidence=Confidence.HIGH if confident else Confidence.MEDIUM,
                )
            )
        summary = req.summary or ""
        payload = {"findings": [f.to_dict() for f in findings], "summary": summary}
        return DetectionReport(c.id, tuple(findings), summary, self.backend_id, _canonical_digest(payload))
