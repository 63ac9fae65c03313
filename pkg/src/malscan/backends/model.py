"""Chat-completion backend for any endpoint speaking the common JSON protocol.

Requests carry ``model``, ``messages`` and ``temperature``; the reply text
is read from ``choices[0].message.content``. Analysis replies must be a JSON
object matching :data:`templates.OUTPUT_SCHEMA`; one repair round is tried
before giving up with :class:`MalformedResponse`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Optional

import jsonschema
import requests

from ..cvss import MalformedVector
from . import templates
from .base import (
    AnalysisBackend,
    BackendRequest,
    BackendUnavailable,
    BudgetExceeded,
    DetectionReport,
    Finding,
    MalformedResponse,
    estimate_tokens,
)

logger = logging.getLogger(__name__)

API_KEY_ENV = "MALSCAN_API_KEY"
_RETRY_STATUS = {408, 429, 500, 502, 503, 504}
_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.S)


@dataclass(frozen=True)
class ModelConfig:
    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model: str = "default"
    timeout: float = 60.0
    max_concurrent: int = 4
    temperature: float = 0.0
    retries: int = 2  # extra attempts on connection errors and 5xx/429
    backoff: float = 1.0

    def __post_init__(self) -> None:
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    @classmethod
    def from_mapping(cls, data: dict) -> "ModelConfig":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ValueError(f"unknown model option(s): {', '.join(unknown)}")
        return cls(**known)


def extract_json(text: str):
    """Pull a JSON object out of a reply that may wrap it in prose or a fence."""
    candidates = [m.group(1) for m in _FENCE.finditer(text)]
    start, end = text.find("{"), text.rfind("}")
    if start >= 0 and end > start:
        candidates.append(text[start:end + 1])
    candidates.append(text)
    err: Optional[Exception] = None
    for cand in candidates:
        try:
            return json.loads(cand)
        except json.JSONDecodeError as exc:
            err = exc
    raise ValueError(f"reply is not valid JSON: {err}")


def parse_findings(payload) -> tuple[Finding, ...]:
    jsonschema.validate(payload, templates.OUTPUT_SCHEMA)
    findings = []
    for i, item in enumerate(payload["findings"]):
        try:
            findings.append(Finding.from_dict(item))
        except (MalformedVector, ValueError, KeyError) as exc:
            raise ValueError(f"findings[{i}]: {exc}") from None
    return tuple(findings)


class ModelBackend(AnalysisBackend):
    def __init__(self, config: ModelConfig, session: Optional[requests.Session] = None,
                 api_key: Optional[str] = None):
        self.config = config
        self.backend_id = f"model:{config.model}"
        self.template_version = templates.template_version()
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._gate = threading.BoundedSemaphore(config.max_concurrent)
        self._shared_session = session
        self._local = threading.local()
        self.dispatched_tokens: list[int] = []  # estimated size of every request sent

    def _session(self) -> requests.Session:
        if self._shared_session is not None:
            return self._shared_session
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def _complete(self, messages: list[dict], budget: int) -> str:
        tokens = sum(estimate_tokens(m["content"]) for m in messages)
        if tokens > budget:
            raise BudgetExceeded(tokens, budget)
        body = {"model": self.config.model, "messages": messages, "temperature": self.config.temperature}
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        last_error = "no attempt made"
        for attempt in range(self.config.retries + 1):
            if attempt:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                with self._gate:
                    self.dispatched_tokens.append(tokens)
                    resp = self._session().post(self.config.endpoint, json=body, headers=headers,
                                                timeout=self.config.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code in _RETRY_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"HTTP {resp.status_code} from {self.config.endpoint}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise MalformedResponse(f"unexpected response envelope: {exc}") from None
        raise BackendUnavailable(f"{self.config.endpoint}: {last_error}")

    def _converse(self, req: BackendRequest, accept):
        """Ask once, repair once. ``accept`` turns reply text into a value or raises ValueError."""
        system, user = templates.render(req)
        messages = [{"role": "system", "content": system}, {"role": "user", "content": user}]
        reply = self._complete(messages, req.token_budget)
        try:
            return accept(reply), reply
        except (ValueError, jsonschema.ValidationError) as exc:
            error = getattr(exc, "message", None) or str(exc)
            logger.info("repairing reply for %s: %s", req.component.id, error)
        ask = {"role": "user", "content": templates.render_repair(error)}
        repair = messages + [{"role": "assistant", "content": reply}, ask]
        if sum(estimate_tokens(m["content"]) for m in repair) > req.token_budget:
            repair = messages + [ask]  # no room to echo the bad reply back
        try:
            reply = self._complete(repair, req.token_budget)
        except BudgetExceeded as exc:
            raise MalformedResponse(f"invalid reply and no room to repair it: {error}") from exc
        try:
            return accept(reply), reply
        except (ValueError, jsonschema.ValidationError) as exc:
            raise MalformedResponse(getattr(exc, "message", None) or str(exc)) from None

    def summarize(self, req: BackendRequest) -> str:
        def accept(reply: str) -> str:
            text = " ".join(reply.split())
            if not text:
                raise ValueError("empty summary")
            return text

        summary, _ = self._converse(req, accept)
        return summary

    def analyze(self, req: BackendRequest) -> DetectionReport:
        findings, reply = self._converse(req, lambda reply: parse_findings(extract_json(reply)))
        digest = hashlib.sha256(reply.encode("utf-8")).hexdigest()
        return DetectionReport(req.component.id, findings, req.summary or "", self.backend_id, digest)
