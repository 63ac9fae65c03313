"""Rule backend playbooks and the chat-completion client."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import jsonschema
import pytest
import requests

from malscan.backends import (
    API_KEY_ENV,
    BackendRequest,
    BackendUnavailable,
    BudgetExceeded,
    Confidence,
    DetectionReport,
    ExploitTrace,
    Finding,
    MalformedResponse,
    ModelBackend,
    ModelConfig,
    Remediation,
    RuleBackend,
    Task,
    estimate_tokens,
)
from malscan.backends.model import extract_json
from malscan.backends.templates import OUTPUT_SCHEMA, prompt_tokens, render, template_version
from malscan.componentizer import SourceFile, decompose
from malscan.config import ScanConfig
from malscan.cvss import parse_vector
from malscan.orchestrator import scan_tree
from malscan.prescore import VulnCategory, prescore
from malscan.report import Status, to_dict, validate

SQLI = ('def find(cursor, name):\n'
        '    cursor.execute("SELECT * FROM users WHERE name = \'" + name + "\'")\n'
        '    return cursor.fetchall()\n')


def _component(text: str, path: str = "m.py"):
    return decompose(SourceFile.from_text(path, text))[0]


def _analyze_request(rules, text=SQLI, path="m.py"):
    c = _component(text, path)
    return BackendRequest(Task.ANALYZE, c, prescore(c, rules).indicators)


# -- token estimate ---------------------------------------------------------------


@pytest.mark.parametrize("text,tokens", [("", 0), ("x" * 300, 100), ("x" * 301, 101), ("é", 1)])
def test_estimate_tokens(text, tokens):
    assert estimate_tokens(text) == tokens


# -- domain types -----------------------------------------------------------------


def _finding(vector="CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:N", category=VulnCategory.SQL_INJECTION,
             title="t"):
    return Finding(category, title, "e", parse_vector(vector), ExploitTrace("entry", ("step",), "impact"),
                   Remediation("fix it"), Confidence.HIGH)


def test_finding_score_is_derived_from_vector():
    f = _finding()
    assert f.score.value == 9.1
    with pytest.raises(ValueError):
        replace(f, score=replace(f.score, value=5.0))


@pytest.mark.parametrize("entry,steps,impact", [("", ("s",), "i"), ("e", (), "i"), ("e", ("s", " "), "i"),
                                                ("e", ("s",), "\n")])
def test_exploit_trace_fields_must_be_present(entry, steps, impact):
    with pytest.raises(ValueError):
        ExploitTrace(entry, steps, impact)


def test_remediation_needs_recommendation():
    with pytest.raises(ValueError):
        Remediation("  ")


def test_detection_report_sorts_findings():
    low = _finding("CVSS:3.1/AV:N/AC:H/PR:N/UI:N/S:U/C:H/I:N/A:N", VulnCategory.HARDCODED_CREDENTIALS)
    high = _finding("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H", VulnCategory.REMOTE_CODE_EXECUTION)
    tie = _finding("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H", VulnCategory.BACKDOOR)
    report = DetectionReport("c", (low, high, tie), "", "x", "d")
    assert [f.category for f in report.findings] == [VulnCategory.BACKDOOR, VulnCategory.REMOTE_CODE_EXECUTION,
                                                     VulnCategory.HARDCODED_CREDENTIALS]
    assert DetectionReport.from_dict(report.to_dict()) == report


# -- rule backend -----------------------------------------------------------------


def test_summary_names_component_and_returns(rules):
    backend = RuleBackend(rules)
    c = _component("function add(a,b){return a+b}\n", "m.js")
    text = backend.summarize(BackendRequest(Task.SUMMARIZE, c))
    assert "add" in text and "returns" in text
    assert "\n" not in text


def test_summary_of_empty_component(rules):
    c = replace(_component("def f():\n    pass\n"), source="")
    text = RuleBackend(rules).summarize(BackendRequest(Task.SUMMARIZE, c, token_budget=3072))
    assert text.startswith("Empty")


def test_sqli_finding(rules):
    report = RuleBackend(rules).analyze(_analyze_request(rules))
    (finding,) = report.findings
    assert finding.category is VulnCategory.SQL_INJECTION
    assert "parameterized" in finding.remediation.recommendation
    assert "`name`" in finding.exploit_trace.entry_point
    assert finding.exploit_trace.steps
    assert finding.score.value == 9.1


def test_request_input_is_named_as_entry(rules):
    text = ('function show(req, res) {\n'
            '  const q = req.query.q || "";\n'
            '  res.send("<p>" + q + "</p>");\n'
            '}\n')
    (finding,) = RuleBackend(rules).analyze(_analyze_request(rules, text, "r.js")).findings
    assert finding.category is VulnCategory.CROSS_SITE_SCRIPTING
    assert "req.query.q" in finding.exploit_trace.entry_point


def test_credential_finding_ships_patch(rules):
    text = 'def connect():\n    password = "s3cr3t-value"\n    return login(password)\n'
    (finding,) = RuleBackend(rules).analyze(_analyze_request(rules, text)).findings
    assert finding.category is VulnCategory.HARDCODED_CREDENTIALS
    assert finding.remediation.patched_snippet == 'password = os.environ["PASSWORD"]'


def test_no_indicators_no_findings(rules):
    c = _component("def f(a):\n    return a\n")
    report = RuleBackend(rules).analyze(BackendRequest(Task.ANALYZE, c, ()))
    assert report.findings == ()


def test_rule_backend_is_deterministic(rules):
    a = RuleBackend(rules).analyze(_analyze_request(rules))
    b = RuleBackend(rules).analyze(_analyze_request(rules))
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)


def test_rule_backend_enforces_budget(rules):
    req = _analyze_request(rules)
    small = replace(req, token_budget=10)
    with pytest.raises(BudgetExceeded):
        RuleBackend(rules).analyze(small)
    with pytest.raises(BudgetExceeded):
        RuleBackend(rules).summarize(replace(small, task=Task.SUMMARIZE))


def test_rule_findings_satisfy_model_output_schema(rules):
    report = RuleBackend(rules).analyze(_analyze_request(rules))
    payload = {"findings": [{k: v for k, v in f.to_dict().items() if k not in ("score", "severity")}
                            for f in report.findings]}
    jsonschema.validate(payload, OUTPUT_SCHEMA)


# -- templates --------------------------------------------------------------------


def test_analyze_prompt_carries_summary_indicators_and_schema(rules):
    req = replace(_analyze_request(rules), summary="Looks up a user.")
    system, user = render(req)
    assert "Looks up a user." in user
    assert "sqli-string-built-query" in user
    assert '"findings"' in user
    assert SQLI in user
    assert prompt_tokens(req) == estimate_tokens(system) + estimate_tokens(user)


def test_template_version_is_stable():
    assert template_version() == template_version()
    assert template_version().startswith("1+")


# -- model backend ----------------------------------------------------------------


def _valid_reply() -> str:
    finding = _finding().to_dict()
    finding.pop("score")
    finding.pop("severity")
    return "Here you go:\n```json\n" + json.dumps({"findings": [finding]}) + "\n```\n"


class FakeResponse:
    def __init__(self, status: int, content: str = ""):
        self.status_code = status
        self._content = content

    def json(self):
        return {"choices": [{"message": {"role": "assistant", "content": self._content}}]}


class FakeSession:
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers, "timeout": timeout})
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


def _model(session, **cfg):
    return ModelBackend(ModelConfig(endpoint="http://model.invalid/v1/chat/completions", model="m",
                                    backoff=0.0, **cfg), session=session, api_key="k")


def test_model_backend_valid_reply(rules):
    session = FakeSession([FakeResponse(200, _valid_reply())])
    report = _model(session).analyze(_analyze_request(rules))
    assert [f.category for f in report.findings] == [VulnCategory.SQL_INJECTION]
    assert report.backend_id == "model:m"
    call = session.calls[0]
    assert call["json"]["temperature"] == 0.0
    assert call["json"]["model"] == "m"
    assert call["headers"]["Authorization"] == "Bearer k"
    assert [m["role"] for m in call["json"]["messages"]] == ["system", "user"]


def test_model_backend_repairs_once(rules):
    session = FakeSession([FakeResponse(200, "not json"), FakeResponse(200, _valid_reply())])
    report = _model(session).analyze(_analyze_request(rules))
    assert len(report.findings) == 1
    repair = session.calls[1]["json"]["messages"]
    assert [m["role"] for m in repair] == ["system", "user", "assistant", "user"]
    assert "could not be used" in repair[-1]["content"]


def test_model_backend_gives_up_after_one_repair(rules):
    session = FakeSession([FakeResponse(200, "nope"), FakeResponse(200, "{\"findings\": 3}")])
    with pytest.raises(MalformedResponse):
        _model(session).analyze(_analyze_request(rules))
    assert len(session.calls) == 2


def test_model_backend_rejects_invalid_vector(rules):
    bad = extract_json(_valid_reply())
    bad["findings"][0]["severity_vector"] = "CVSS:3.1/AV:N/AC:L"
    session = FakeSession([FakeResponse(200, json.dumps(bad))] * 2)
    with pytest.raises(MalformedResponse):
        _model(session).analyze(_analyze_request(rules))


def test_model_backend_retries_transient_errors(rules):
    session = FakeSession([FakeResponse(503), requests.ConnectionError("reset"), FakeResponse(200, "A summary.")])
    text = _model(session).summarize(BackendRequest(Task.SUMMARIZE, _component(SQLI)))
    assert text == "A summary."
    assert len(session.calls) == 3


def test_model_backend_unavailable_after_retries(rules):
    session = FakeSession([FakeResponse(500)] * 3)
    with pytest.raises(BackendUnavailable):
        _model(session, retries=2).summarize(BackendRequest(Task.SUMMARIZE, _component(SQLI)))
    assert len(session.calls) == 3


def test_model_backend_client_error_is_not_retried(rules):
    session = FakeSession([FakeResponse(401)])
    with pytest.raises(BackendUnavailable, match="401"):
        _model(session).summarize(BackendRequest(Task.SUMMARIZE, _component(SQLI)))
    assert len(session.calls) == 1


def test_model_backend_never_dispatches_over_budget(rules):
    session = FakeSession([])
    backend = _model(session)
    with pytest.raises(BudgetExceeded):
        backend.analyze(replace(_analyze_request(rules), token_budget=50))
    assert session.calls == [] and backend.dispatched_tokens == []


def test_model_backend_reads_key_from_environment(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "from-env")
    session = FakeSession([FakeResponse(200, "ok")])
    backend = ModelBackend(ModelConfig(model="m"), session=session)
    backend.summarize(BackendRequest(Task.SUMMARIZE, _component(SQLI)))
    assert session.calls[0]["headers"]["Authorization"] == "Bearer from-env"


def test_model_backend_caps_concurrency():
    state = {"now": 0, "peak": 0}
    lock = threading.Lock()

    class SlowSession:
        def post(self, url, json=None, headers=None, timeout=None):
            with lock:
                state["now"] += 1
                state["peak"] = max(state["peak"], state["now"])
            time.sleep(0.02)
            with lock:
                state["now"] -= 1
            return FakeResponse(200, "summary")

    backend = _model(SlowSession(), max_concurrent=2)
    req = BackendRequest(Task.SUMMARIZE, _component(SQLI))
    threads = [threading.Thread(target=backend.summarize, args=(req,)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert state["peak"] == 2


@pytest.mark.parametrize("text,expected", [
    ('{"a": 1}', {"a": 1}),
    ('prefix ```json\n{"a": 2}\n``` suffix', {"a": 2}),
    ('Sure! {"a": 3} hope that helps', {"a": 3}),
])
def test_extract_json(text, expected):
    assert extract_json(text) == expected


def test_extract_json_failure():
    with pytest.raises(ValueError):
        extract_json("no json here")


# -- end to end over HTTP ---------------------------------------------------------


class _ChatHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        user = body["messages"][-1]["content"]
        content = _valid_reply() if '"findings"' in user else "Looks up a user by name."
        data = json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def chat_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ChatHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    server.shutdown()
    server.server_close()


def test_model_backend_full_pipeline_over_http(tmp_path, rules, chat_server, pinned_clock):
    (tmp_path / "db.py").write_text(SQLI)
    backend = ModelBackend(ModelConfig(endpoint=chat_server, model="local", timeout=5), api_key="")
    report = scan_tree(tmp_path, ScanConfig(backend="model"), rules, backend)
    (record,) = list(report.components())
    assert record.status is Status.ANALYZED
    assert record.summary == "Looks up a user by name."
    assert record.detection.backend_id == "model:local"
    assert [f.category for f in record.detection.findings] == [VulnCategory.SQL_INJECTION]
    validate(to_dict(report))


def test_unreachable_model_degrades(tmp_path, rules, pinned_clock):
    (tmp_path / "db.py").write_text(SQLI)
    backend = ModelBackend(ModelConfig(endpoint="http://127.0.0.1:9/v1/chat/completions", model="x",
                                       timeout=1, retries=0), api_key="")
    report = scan_tree(tmp_path, ScanConfig(backend="model"), rules, backend)
    (record,) = list(report.components())
    assert record.status is Status.DEGRADED_BACKEND_ERROR
    assert record.prescore.flagged
    assert "BackendUnavailable" in record.error
