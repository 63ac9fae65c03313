"""Backend contract shared by the rule-based and model-based analysers."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..componentizer import CodeComponent
from ..cvss import CvssScore, CvssVector, base_score, parse_vector
from ..languages import LanguageId
from ..prescore import Indicator, VulnCategory

DEFAULT_TOKEN_BUDGET = 3072
BYTES_PER_TOKEN = 3


class BackendError(Exception):
    """Base class for failures while talking to an analysis backend."""


class BackendUnavailable(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class BudgetExceeded(BackendError):
    def __init__(self, estimated: int, budget: int, what: str = "prompt"):
        super().__init__(f"{what} needs ~{estimated} tokens, budget is {budget}")
        self.estimated = estimated
        self.budget = budget


def estimate_tokens(text: str) -> int:
    """Conservative token count: one token per started 3 bytes of UTF-8."""
    return math.ceil(len(text.encode("utf-8", errors="surrogateescape")) / BYTES_PER_TOKEN)


class Task(str, Enum):
    SUMMARIZE = "summarize"
    ANALYZE = "analyze"


class Confidence(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


@dataclass(frozen=True)
class BackendRequest:
    task: Task
    component: CodeComponent
    indicators: tuple[Indicator, ...] = ()
    token_budget: int = DEFAULT_TOKEN_BUDGET
    summary: Optional[str] = None  # Phase-1 summary, offered as context to analyze

    def __post_init__(self) -> None:
        if self.token_budget <= 0:
            raise ValueError("token_budget must be positive")

    @property
    def language(self) -> LanguageId:
        return self.component.language


def _require_text(value: str, what: str) -> None:
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"{what} must be non-blank")


@dataclass(frozen=True)
class ExploitTrace:
    entry_point: str
    steps: tuple[str, ...]
    impact: str

    def __post_init__(self) -> None:
        _require_text(self.entry_point, "entry_point")
        _require_text(self.impact, "impact")
        if not self.steps:
            raise ValueError("exploit trace needs at least one step")
        for step in self.steps:
            _require_text(step, "trace step")

    def to_dict(self) -> dict:
        return {"entry_point": self.entry_point, "steps": list(self.steps), "impact": self.impact}

    @classmethod
    def from_dict(cls, d: dict) -> "ExploitTrace":
        return cls(d["entry_point"], tuple(d["steps"]), d["impact"])


@dataclass(frozen=True)
class Remediation:
    recommendation: str
    patched_snippet: Optional[str] = None
    preserves_functionality_note: str = ""

    def __post_init__(self) -> None:
        _require_text(self.recommendation, "recommendation")

    def to_dict(self) -> dict:
        return {
            "recommendation": self.recommendation,
            "patched_snippet": self.patched_snippet,
            "preserves_functionality_note": self.preserves_functionality_note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Remediation":
        return cls(d["recommendation"], d.get("patched_snippet"), d.get("preserves_functionality_note") or "")


@dataclass(frozen=True)
class Finding:
    category: VulnCategory
    title: str
    explanation: str
    severity_vector: CvssVector
    exploit_trace: ExploitTrace
    remediation: Remediation
    confidence: Confidence = Confidence.MEDIUM
    score: CvssScore = field(default=None)  # derived from severity_vector

    def __post_init__(self) -> None:
        expected = base_score(self.severity_vector)
        if self.score is None:
            object.__setattr__(self, "score", expected)
        elif self.score != expected:
            raise ValueError(f"score {self.score.value} does not match vector ({expected.value})")

    def to_dict(self) -> dict:
        return {
            "category": self.category.value,
            "title": self.title,
            "explanation": self.explanation,
            "severity_vector": self.severity_vector.render(),
            "score": self.score.value,
            "severity": self.score.severity.value,
            "exploit_trace": self.exploit_trace.to_dict(),
            "remediation": self.remediation.to_dict(),
            "confidence": self.confidence.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        vector = parse_vector(d["severity_vector"])
        finding = cls(
            category=VulnCategory(d["category"]),
            title=d["title"],
            explanation=d["explanation"],
            severity_vector=vector,
            exploit_trace=ExploitTrace.from_dict(d["exploit_trace"]),
            remediation=Remediation.from_dict(d["remediation"]),
            confidence=Confidence(d["confidence"]),
        )
        if "score" in d and d["score"] != finding.score.value:
            raise ValueError(f"stored score {d['score']} does not match vector {d['severity_vector']}")
        return finding


def sort_findings(findings) -> tuple[Finding, ...]:
    return tuple(sorted(findings, key=lambda f: (-f.score.value, f.category.value, f.title)))


@dataclass(frozen=True)
class DetectionReport:
    component_id: str
    findings: tuple[Finding, ...]
    summary: str
    backend_id: str
    raw_response_digest: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "findings", sort_findings(self.findings))

    def to_dict(self) -> dict:
        return {
            "component_id": self.component_id,
            "findings": [f.to_dict() for f in self.findings],
            "summary": self.summary,
            "backend_id": self.backend_id,
            "raw_response_digest": self.raw_response_digest,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionReport":
        return cls(
            d["component_id"],
            tuple(Finding.from_dict(f) for f in d["findings"]),
            d["summary"],
            d["backend_id"],
            d["raw_response_digest"],
        )


class AnalysisBackend(ABC):
    """Phase-1 summarisation and Phase-2 analysis behind one interface.

    Implementations must be safe to call from several threads at once.
    """

    backend_id: str
    template_version: str

    @abstractmethod
    def summarize(self, req: BackendRequest) -> str: ...

    @abstractmethod
    def analyze(self, req: BackendRequest) -> DetectionReport: ...
