"""Versioned prompt templates for both pipeline phases.

The template text ships as package data. ``template_version()`` changes
whenever any template or the output schema changes, and is recorded in
every report and cache key.
"""

from __future__ import annotations

import hashlib
import json
from functools import lru_cache
from importlib import resources
from string import Template

from ..prescore import VulnCategory
from .base import BackendRequest, Task, estimate_tokens

TEMPLATE_SERIES = "1"
_NAMES = ("system", "summarize", "analyze", "repair")

OUTPUT_SCHEMA = {
    "type": "object",
    "required": ["findings"],
    "additionalProperties": False,
    "properties": {
        "findings": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "category", "title", "explanation", "severity_vector",
                    "exploit_trace", "remediation", "confidence",
                ],
                "additionalProperties": False,
                "properties": {
                    "category": {"enum": [c.value for c in VulnCategory]},
                    "title": {"type": "string", "minLength": 1},
                    "explanation": {"type": "string", "minLength": 1},
                    "severity_vector": {"type": "string", "pattern": "^CVSS:3\\.1/"},
                    "exploit_trace": {
                        "type": "object",
                        "required": ["entry_point", "steps", "impact"],
                        "additionalProperties": False,
                        "properties": {
                            "entry_point": {"type": "string", "pattern": "\\S"},
                            "steps": {"type": "array", "minItems": 1, "items": {"type": "string", "pattern": "\\S"}},
                            "impact": {"type": "string", "pattern": "\\S"},
                        },
                    },
                    "remediation": {
                        "type": "object",
                        "required": ["recommendation"],
                        "additionalProperties": False,
                        "properties": {
                            "recommendation": {"type": "string", "pattern": "\\S"},
                            "patched_snippet": {"type": ["string", "null"]},
                            "preserves_functionality_note": {"type": "string"},
                        },
                    },
                    "confidence": {"enum": ["low", "medium", "high"]},
                },
            },
        }
    },
}


@lru_cache(maxsize=None)
def template_text(name: str) -> str:
    return resources.files("malscan").joinpath(f"data/templates/{name}.txt").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def template_version() -> str:
    h = hashlib.sha256()
    for name in _NAMES:
        h.update(name.encode() + b"\0" + template_text(name).encode("utf-8") + b"\0")
    h.update(json.dumps(OUTPUT_SCHEMA, sort_keys=True).encode())
    return f"{TEMPLATE_SERIES}+{h.hexdigest()[:12]}"


def _indicator_lines(req: BackendRequest) -> str:
    if not req.indicators:
        return "(none)"
    source = req.component.source_bytes
    lines = []
    for ind in req.indicators:
        line = req.component.start_line + source.count(b"\n", 0, ind.span.start)
        lines.append(f"- {ind.rule_id} [{ind.category.value}] line {line}: {ind.excerpt!r} ({ind.vector.render()})")
    return "\n".join(lines)


def render(req: BackendRequest) -> tuple[str, str]:
    """Return the (system, user) messages for ``req``."""
    c = req.component
    fields = {
        "language": c.language.value,
        "kind": c.kind.value.replace("_", " "),
        "name": c.name,
        "path": c.path,
        "lines": f"{c.start_line}-{c.end_line}",
        "source": c.source,
    }
    if req.task is Task.ANALYZE:
        fields.update(
            summary=req.summary or "(not available)",
            indicators=_indicator_lines(req),
            categories=", ".join(v.value for v in VulnCategory),
            schema=json.dumps(OUTPUT_SCHEMA, separators=(",", ":"), sort_keys=True),
        )
    user = Template(template_text(req.task.value)).substitute(fields)
    return template_text("system").strip(), user


def render_repair(error: str) -> str:
    return Template(template_text("repair")).substitute(error=error)


def prompt_tokens(req: BackendRequest) -> int:
    system, user = render(req)
    return estimate_tokens(system) + estimate_tokens(user)
