"""Analysis backends: the deterministic rule backend and a chat-completion client."""

from .base import (
    DEFAULT_TOKEN_BUDGET,
    AnalysisBackend,
    BackendError,
    BackendRequest,
    BackendUnavailable,
    BudgetExceeded,
    Confidence,
    DetectionReport,
    ExploitTrace,
    Finding,
    MalformedResponse,
    Remediation,
    Task,
    estimate_tokens,
    sort_findings,
)
from .model import API_KEY_ENV, ModelBackend, ModelConfig
from .rules import RuleBackend

__all__ = [
    "API_KEY_ENV",
    "DEFAULT_TOKEN_BUDGET",
    "AnalysisBackend",
    "BackendError",
    "BackendRequest",
    "BackendUnavailable",
    "BudgetExceeded",
    "Confidence",
    "DetectionReport",
    "ExploitTrace",
    "Finding",
    "MalformedResponse",
    "ModelBackend",
    "ModelConfig",
    "Remediation",
    "RuleBackend",
    "Task",
    "estimate_tokens",
    "sort_findings",
]
