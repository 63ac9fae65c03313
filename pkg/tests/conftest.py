from __future__ import annotations

import threading
from pathlib import Path

import pytest

from malscan.backends import AnalysisBackend, BackendRequest, BackendUnavailable, DetectionReport, RuleBackend, Task
from malscan.backends.templates import prompt_tokens, template_version
from malscan.prescore import bundled_rules

TESTS = Path(__file__).resolve().parent
FIXTURES = TESTS / "fixtures"
LANG_FIXTURES = FIXTURES / "languages"
GOLDEN = TESTS / "golden"


@pytest.fixture(scope="session")
def rules():
    return bundled_rules()


@pytest.fixture
def pinned_clock(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")


class RecordingBackend(AnalysisBackend):
    """Wraps the rule backend, recording requests and asserting the budget."""

    backend_id = "rules"

    def __init__(self, rules, fail: bool = False):
        self.inner = RuleBackend(rules)
        self.template_version = template_version()
        self.fail = fail
        self.requests: list[BackendRequest] = []
        self.dispatched_tokens: list[int] = []
        self._lock = threading.Lock()

    def _record(self, req: BackendRequest) -> None:
        tokens = prompt_tokens(req)
        assert tokens <= req.token_budget, f"request of {tokens} tokens exceeds budget {req.token_budget}"
        with self._lock:
            self.requests.append(req)
            self.dispatched_tokens.append(tokens)

    def summarize(self, req: BackendRequest) -> str:
        self._record(req)
        if self.fail:
            raise BackendUnavailable("stub backend is down")
        return self.inner.summarize(req)

    def analyze(self, req: BackendRequest) -> DetectionReport:
        self._record(req)
        if self.fail:
            raise BackendUnavailable("stub backend is down")
        return self.inner.analyze(req)

    def analyzed_ids(self) -> set[str]:
        return {r.component.parent_id if "(part " in r.component.name else r.component.id
                for r in self.requests if r.task is Task.ANALYZE}


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
