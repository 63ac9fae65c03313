"""Component-wise scan report: canonical JSON, Markdown and CI exit codes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Optional

import jsonschema

from .backends import DetectionReport
from .componentizer import ComponentKind, Span
from .cvss import CvssScore, Severity, parse_vector
from .languages import LanguageId
from .prescore import Indicator, PrescoreResult, VulnCategory

SCHEMA_VERSION = "1.0"
SEVERITY_ORDER = (Severity.CRITICAL, Severity.HIGH, Severity.MEDIUM, Severity.LOW, Severity.NONE)


class Status(str, Enum):
    ANALYZED = "analyzed"
    SKIPPED_LOW_RISK = "skipped_low_risk"
    DEGRADED_BACKEND_ERROR = "degraded_backend_error"


class ReportError(ValueError):
    """A stored report cannot be loaded."""


class SchemaVersionMismatch(ReportError):
    pass


@lru_cache(maxsize=None)
def report_schema() -> dict:
    text = resources.files("malscan").joinpath("data/report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(document: dict) -> None:
    """Raise jsonschema.ValidationError unless ``document`` matches the report schema."""
    jsonschema.validate(document, report_schema())


# -- records ----------------------------------------------------------------


@dataclass(frozen=True)
class ComponentRecord:
    id: str
    name: str
    kind: ComponentKind
    span: Span
    start_line: int
    end_line: int
    parent_id: Optional[str]
    summary: Optional[str]
    status: Status
    prescore: PrescoreResult
    detection: Optional[DetectionReport] = None
    error: Optional[str] = None

    def __post_init__(self) -> None:
        if (self.detection is not None) != (self.status is Status.ANALYZED):
            raise ValueError("detection must be present exactly when status is analyzed")

    @classmethod
    def from_outcome(cls, outcome) -> "ComponentRecord":
        c = outcome.component
        return cls(c.id, c.name, c.kind, c.span, c.start_line, c.end_line, c.parent_id, c.summary,
                   outcome.status, outcome.prescore, outcome.detection, outcome.error)


@dataclass(frozen=True)
class FileReport:
    path: str
    language: LanguageId
    content_hash: str
    components: tuple[ComponentRecord, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.components, key=lambda c: (c.span.start, -c.span.end, c.id)))
        object.__setattr__(self, "components", ordered)


@dataclass(frozen=True)
class ScanError:
    path: str
    message: str


@dataclass(frozen=True)
class ScanReport:
    tool_version: str
    started_at: str
    finished_at: str
    config_digest: str
    backend_id: str
    template_version: str
    rule_set_digest: str
    flag_threshold: float
    token_budget: int
    files: tuple[FileReport, ...] = ()
    errors: tuple[ScanError, ...] = ()
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "files", tuple(sorted(self.files, key=lambda f: f.path)))
        object.__setattr__(self, "errors", tuple(sorted(self.errors, key=lambda e: (e.path, e.message))))

    def components(self):
        for f in self.files:
            yield from f.components

    def findings(self):
        for c in self.components():
            if c.detection is not None:
                yield from c.detection.findings

    @property
    def totals(self) -> dict:
        comps = list(self.components())
        by_status = {s: sum(1 for c in comps if c.status is s) for s in Status}
        findings = list(self.findings())
        by_severity = {s.value: sum(1 for f in findings if f.score.severity is s) for s in Severity}
        return {
            "files": len(self.files),
            "components": len(comps),
            "analyzed": by_status[Status.ANALYZED],
            "skipped": by_status[Status.SKIPPED_LOW_RISK],
            "degraded": by_status[Status.DEGRADED_BACKEND_ERROR],
            "findings": len(findings),
            "findings_by_severity": by_severity,
        }


# -- JSON -------------------------------------------------------------------


def _score_dict(score: CvssScore) -> dict:
    return {"value": score.value, "severity": score.severity.value}


def _indicator_dict(ind: Indicator) -> dict:
    return {
        "rule_id": ind.rule_id,
        "category": ind.category.value,
        "span": {"start": ind.span.start, "end": ind.span.end},
        "excerpt": ind.excerpt,
        "vector": ind.vector.render(),
        "score": ind.score.value,
    }


def _component_dict(c: ComponentRecord) -> dict:
    return {
        "id": c.id,
        "name": c.name,
        "kind": c.kind.value,
        "span": {"start": c.span.start, "end": c.span.end},
        "start_line": c.start_line,
        "end_line": c.end_line,
        "parent_id": c.parent_id,
        "summary": c.summary,
        "status": c.status.value,
        "error": c.error,
        "prescore": {
            "score": _score_dict(c.prescore.score),
            "flagged": c.prescore.flagged,
            "indicators": [_indicator_dict(i) for i in c.prescore.indicators],
            "warnings": list(c.prescore.warnings),
        },
        "detection": c.detection.to_dict() if c.detection else None,
    }


def to_dict(report: ScanReport) -> dict:
    return {
        "schema_version": report.schema_version,
        "tool_version": report.tool_version,
        "started_at": report.started_at,
        "finished_at": report.finished_at,
        "config_digest": report.config_digest,
        "backend_id": report.backend_id,
        "template_version": report.template_version,
        "rule_set_digest": report.rule_set_digest,
        "flag_threshold": report.flag_threshold,
        "token_budget": report.token_budget,
        "files": [
            {
                "path": f.path,
                "language": f.language.value,
                "content_hash": f.content_hash,
                "warnings": list(f.warnings),
                "components": [_component_dict(c) for c in f.components],
            }
            for f in report.files
        ],
        "errors": [{"path": e.path, "message": e.message} for e in report.errors],
        "totals": report.totals,
    }


def to_json(report: ScanReport) -> str:
    """Canonical JSON: sorted keys, two-space indent, UTF-8 text, trailing newline."""
    return json.dumps(to_dict(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _indicator_from(d: dict) -> Indicator:
    return Indicator(d["rule_id"], VulnCategory(d["category"]), Span(d["span"]["start"], d["span"]["end"]),
                     d["excerpt"], parse_vector(d["vector"]))


def _component_from(d: dict) -> ComponentRecord:
    p = d["prescore"]
    prescore = PrescoreResult(
        d["id"],
        tuple(_indicator_from(i) for i in p["indicators"]),
        CvssScore(p["score"]["value"], Severity(p["score"]["severity"])),
        p["flagged"],
        tuple(p["warnings"]),
    )
    return ComponentRecord(
        id=d["id"],
        name=d["name"],
        kind=ComponentKind(d["kind"]),
        span=Span(d["span"]["start"], d["span"]["end"]),
        start_line=d["start_line"],
        end_line=d["end_line"],
        parent_id=d["parent_id"],
        summary=d["summary"],
        status=Status(d["status"]),
        prescore=prescore,
        detection=DetectionReport.from_dict(d["detection"]) if d["detection"] is not None else None,
        error=d["error"],
    )


def from_dict(d: dict) -> ScanReport:
    """Rebuild a report, checking version, schema and totals."""
    if not isinstance(d, dict):
        raise ReportError("report must be a JSON object")
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION!r}")
    try:
        validate(d)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ReportError(f"report does not match schema at {where}: {exc.message}") from None
    try:
        report = ScanReport(
            tool_version=d["tool_version"],
            started_at=d["started_at"],
            finished_at=d["finished_at"],
            config_digest=d["config_digest"],
            backend_id=d["backend_id"],
            template_version=d["template_version"],
            rule_set_digest=d["rule_set_digest"],
            flag_threshold=d["flag_threshold"],
            token_budget=d["token_budget"],
            files=tuple(
                FileReport(f["path"], LanguageId(f["language"]), f["content_hash"],
                           tuple(_component_from(c) for c in f["components"]), tuple(f["warnings"]))
                for f in d["files"]
            ),
            errors=tuple(ScanError(e["path"], e["message"]) for e in d["errors"]),
            schema_version=version,
        )
    except (ValueError, KeyError) as exc:
        raise ReportError(f"inconsistent report: {exc}") from None
    if report.totals != d["totals"]:
        raise ReportError("totals block does not match the report body")
    return report


def from_json(text: str) -> ScanReport:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportError(f"invalid JSON: {exc}") from None
    return from_dict(data)


def exit_code(report: ScanReport, fail_threshold: float) -> int:
    """1 when any finding scores at or above ``fail_threshold``, else 0."""
    return 1 if any(f.score.value >= fail_threshold for f in report.findings()) else 0


# -- Markdown ---------------------------------------------------------------


def _code(text: str) -> str:
    text = " ".join(text.split())
    ticks = "`"
    while ticks in text:
        ticks += "`"
    pad = " " if text.startswith("`") or text.endswith("`") else ""
    return f"{ticks}{pad}{text}{pad}{ticks}"


def _fence(snippet: str, language: str) -> list[str]:
    fence = "```"
    while fence in snippet:
        fence += "`"
    return [f"{fence}{language}", snippet.rstrip("\n"), fence]


def _badge(score: CvssScore) -> str:
    return f"**[{score.severity.value.upper()} {score.value:.1f}]**"


def _render_component(c: ComponentRecord, f: FileReport, out: list[str]) -> None:
    kind = c.kind.value.replace("_", " ")
    out.append(f"### {kind} {_code(c.name)}")
    out.append("")
    out.append(f"- Lines {c.start_line}-{c.end_line}, bytes [{c.span.start}, {c.span.end})")
    out.append(f"- Status: {c.status.value}")
    if c.summary:
        out.append(f"- Summary: {c.summary}")
    flagged = "flagged" if c.prescore.flagged else "not flagged"
    out.append(f"- Prescore: {c.prescore.score.value:.1f} ({c.prescore.score.severity.value}), {flagged}")
    for ind in c.prescore.indicators:
        out.append(f"  - {_code(ind.rule_id)} [{ind.category.value}] {_code(ind.excerpt)}")
    if c.error:
        out.append(f"- Backend error: {c.error}")
    out.append("")
    if c.detection is None:
        return
    if not c.detection.findings:
        out.append("No findings.")
        out.append("")
    for n, finding in enumerate(c.detection.findings, 1):
        out.append(f"#### Finding {n}: {finding.title}")
        out.append("")
        out.append(f"{_badge(finding.score)} {_code(finding.severity_vector.render())} "
                   f"(category: {finding.category.value}, confidence: {finding.confidence.value})")
        out.append("")
        out.append(finding.explanation)
        out.append("")
        out.append("Exploit trace:")
        out.append("")
        trace = finding.exploit_trace
        items = [f"Entry point: {trace.entry_point}", *trace.steps, f"Impact: {trace.impact}"]
        out.extend(f"{i}. {item}" for i, item in enumerate(items, 1))
        out.append("")
        rem = finding.remediation
        out.append(f"Remediation: {rem.recommendation}")
        out.append("")
        if rem.patched_snippet:
            out.extend(_fence(rem.patched_snippet, f.language.value))
            out.append("")
        if rem.preserves_functionality_note:
            out.append(f"Preserved behaviour: {rem.preserves_functionality_note}")
            out.append("")


def to_markdown(report: ScanReport) -> str:
    t = report.totals
    sev = ", ".join(f"{s.value} {t['findings_by_severity'][s.value]}" for s in SEVERITY_ORDER)
    out = [
        "# Security scan report",
        "",
        f"- Tool version: {report.tool_version}",
        f"- Backend: {report.backend_id} (templates {report.template_version})",
        f"- Rule set: {report.rule_set_digest[:16]}",
        f"- Started: {report.started_at}; finished: {report.finished_at}",
        f"- Flag threshold: {report.flag_threshold:.1f}; token budget: {report.token_budget}",
        f"- Files: {t['files']}; components: {t['components']} "
        f"(analyzed {t['analyzed']}, skipped {t['skipped']}, degraded {t['degraded']})",
        f"- Findings: {t['findings']} ({sev})",
        "",
    ]
    if t["analyzed"] == 0:
        out += ["No components analyzed.", ""]
    if report.errors:
        out += ["## Errors", ""]
        out += [f"- {_code(e.path)}: {e.message}" for e in report.errors]
        out.append("")
    for f in report.files:
        out.append(f"## {_code(f.path)} ({f.language.value})")
        out.append("")
        for w in f.warnings:
            out.append(f"> Warning: {w}")
            out.append("")
        if not f.components:
            out += ["No components.", ""]
        for c in f.components:
            _render_component(c, f, out)
    while out and out[-1] == "":
        out.pop()
    return "\n".join(out) + "\n"
