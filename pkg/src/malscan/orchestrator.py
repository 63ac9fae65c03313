"""Two-phase pipeline driver: decompose, triage, summarise, analyse, report."""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import os
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from fnmatch import fnmatch
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import __version__
from .backends import (
    AnalysisBackend,
    BackendError,
    BackendRequest,
    BudgetExceeded,
    DetectionReport,
    Task,
    sort_findings,
)
from .backends.templates import prompt_tokens
from .cache import ResultCache, cache_key
from .componentizer import (
    CodeComponent,
    ParseFailure,
    SourceFile,
    Span,
    component_id,
    decompose,
    fallback_fragment,
)
from .config import ScanConfig
from .languages import detect_language
from .prescore import IndicatorRule, PrescoreResult, prescore, rules_digest
from .report import ComponentRecord, FileReport, ScanError, ScanReport, Status

logger = logging.getLogger(__name__)

MIN_CHUNK_BYTES = 64
BINARY_SNIFF_BYTES = 8192


class RootMissing(FileNotFoundError):
    pass


class FileUnreadable(OSError):
    pass


@dataclass(frozen=True)
class ComponentOutcome:
    component: CodeComponent
    prescore: PrescoreResult
    status: Status
    detection: Optional[DetectionReport] = None
    error: Optional[str] = None

    def __post_init__(self) -> None:
        if (self.detection is not None) != (self.status is Status.ANALYZED):
            raise ValueError("detection must be present exactly when status is analyzed")


def read_source(root: Path, rel: str) -> Optional[SourceFile]:
    """Load ``root/rel``; returns None for files that look binary."""
    try:
        data = (root / rel).read_bytes()
    except OSError as exc:
        raise FileUnreadable(f"{rel}: {exc.strerror or exc}") from None
    if b"\0" in data[:BINARY_SNIFF_BYTES]:
        return None
    return SourceFile.from_bytes(rel, data, detect_language(rel))


# -- component planning --------------------------------------------------------


def _child_spans(component: CodeComponent, components: Sequence[CodeComponent]) -> list[Span]:
    base = component.span.start
    return [Span(c.span.start - base, c.span.end - base) for c in components if c.parent_id == component.id]


def _chunks(component: CodeComponent, max_bytes: int) -> list[CodeComponent]:
    """Cut an oversized component into fragments with file-absolute spans."""
    inner = SourceFile.from_text(component.path, component.source, component.language)
    parts = fallback_fragment(inner, max_bytes)
    out = []
    for n, part in enumerate(parts, 1):
        span = Span(component.span.start + part.span.start, component.span.start + part.span.end)
        out.append(
            CodeComponent(
                id=component_id(component.path, span, component.kind),
                path=component.path,
                language=component.language,
                kind=component.kind,
                name=f"{component.name} (part {n} of {len(parts)})",
                span=span,
                source=part.source,
                start_line=component.start_line + part.start_line - 1,
                end_line=component.start_line + part.end_line - 1,
                parent_id=component.id,
            )
        )
    return out


class _Planner:
    """Builds budget-respecting backend requests for one component."""

    def __init__(self, cfg: ScanConfig, rules: Sequence[IndicatorRule]):
        self.cfg = cfg
        self.rules = rules

    def requests(self, task: Task, component: CodeComponent, pre: PrescoreResult,
                 summary: Optional[str] = None) -> list[BackendRequest]:
        budget = self.cfg.token_budget
        whole = BackendRequest(task, component, pre.indicators if task is Task.ANALYZE else (), budget, summary)
        tokens = prompt_tokens(whole)
        if tokens <= budget:
            return [whole]
        empty = dataclasses.replace(component, source="")
        overhead = prompt_tokens(dataclasses.replace(whole, component=empty))
        max_bytes = (budget - overhead) * 3
        while max_bytes >= MIN_CHUNK_BYTES:
            reqs = []
            for chunk in _chunks(component, max_bytes):
                inds = prescore(chunk, self.rules, self.cfg.flag_threshold).indicators if task is Task.ANALYZE else ()
                reqs.append(BackendRequest(task, chunk, inds, budget, summary))
            if all(prompt_tokens(r) <= budget for r in reqs):
                return reqs
            max_bytes = max_bytes * 3 // 4
        raise BudgetExceeded(tokens, budget, f"component {component.name}")


def _merge(component: CodeComponent, reports: Sequence[DetectionReport], summary: str,
           backend_id: str) -> DetectionReport:
    if len(reports) == 1:
        r = reports[0]
        return DetectionReport(component.id, r.findings, summary, r.backend_id, r.raw_response_digest)
    best = {}
    for f in sort_findings(f for r in reports for f in r.findings):
        best.setdefault(f.category, f)
    digest = hashlib.sha256("".join(r.raw_response_digest for r in reports).encode()).hexdigest()
    return DetectionReport(component.id, tuple(best.values()), summary, backend_id, digest)


# -- per-file scanning ---------------------------------------------------------


@dataclass
class _Job:
    component: CodeComponent
    prescore: PrescoreResult
    route: bool  # send to phase 2


class Pipeline:
    def __init__(self, cfg: ScanConfig, rules: Sequence[IndicatorRule], backend: AnalysisBackend,
                 cache: Optional[ResultCache] = None):
        self.cfg = cfg
        self.rules = list(rules)
        self.backend = backend
        self.cache = cache
        self.rules_digest = rules_digest(self.rules)
        self.planner = _Planner(cfg, self.rules)

    def decompose(self, file: SourceFile) -> tuple[list[CodeComponent], list[str]]:
        try:
            return decompose(file), []
        except ParseFailure as exc:
            msg = f"structural parse failed at offset {exc.position} ({exc.reason}); using fixed-size fragments"
            logger.warning("%s: %s", file.path, msg)
            return fallback_fragment(file, self.cfg.fragment_bytes), [msg]

    def plan(self, file: SourceFile) -> tuple[list[_Job], list[str]]:
        components, warnings = self.decompose(file)
        jobs = []
        for c in components:
            pre = prescore(c, self.rules, self.cfg.flag_threshold, exclude=_child_spans(c, components))
            warnings.extend(pre.warnings)
            jobs.append(_Job(c, pre, pre.flagged or self.cfg.force_analyze_all))
        return jobs, warnings

    def _key(self, file_hash: str, c: CodeComponent, task: str) -> str:
        return cache_key(
            task=task,
            content_hash=file_hash,
            path=c.path,
            span=[c.span.start, c.span.end],
            kind=c.kind.value,
            rules=self.rules_digest,
            template_version=self.backend.template_version,
            backend_id=self.backend.backend_id,
            token_budget=self.cfg.token_budget,
        )

    def _summarize(self, c: CodeComponent, pre: PrescoreResult) -> str:
        reqs = self.planner.requests(Task.SUMMARIZE, c, pre)
        text = self.backend.summarize(reqs[0])
        if len(reqs) > 1:
            text = f"{text} (summary of the first of {len(reqs)} parts)"
        return text

    def run_job(self, job: _Job, file_hash: str) -> ComponentOutcome:
        c, pre = job.component, job.prescore
        if not job.route:
            if not self.cfg.full_report:
                return ComponentOutcome(c, pre, Status.SKIPPED_LOW_RISK)
            try:
                summary = self._cached(file_hash, c, "summary", lambda: {"summary": self._summarize(c, pre)})
                c = dataclasses.replace(c, summary=summary["summary"])
            except BackendError as exc:
                logger.warning("%s: summary for %s failed: %s", c.path, c.name, exc)
                return ComponentOutcome(c, pre, Status.SKIPPED_LOW_RISK, error=f"summary failed: {exc}")
            return ComponentOutcome(c, pre, Status.SKIPPED_LOW_RISK)

        def compute() -> dict:
            summary = self._summarize(c, pre)
            reports = [self.backend.analyze(r) for r in self.planner.requests(Task.ANALYZE, c, pre, summary)]
            merged = _merge(c, reports, summary, self.backend.backend_id)
            return {"summary": summary, "detection": merged.to_dict()}

        try:
            value = self._cached(file_hash, c, "analysis", compute)
        except BackendError as exc:
            logger.warning("%s: backend failed on %s: %s", c.path, c.name, exc)
            return ComponentOutcome(c, pre, Status.DEGRADED_BACKEND_ERROR, error=f"{type(exc).__name__}: {exc}")
        detection = DetectionReport.from_dict(value["detection"])
        return ComponentOutcome(dataclasses.replace(c, summary=value["summary"]), pre, Status.ANALYZED, detection)

    def _cached(self, file_hash: str, c: CodeComponent, task: str, compute: Callable[[], dict]) -> dict:
        if self.cache is None:
            return compute()
        key = self._key(file_hash, c, task)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        value = compute()
        self.cache.put(key, value)
        return value


def _scan_file(pipeline: Pipeline, file: SourceFile, pool: Optional[Executor]):
    jobs, warnings = pipeline.plan(file)
    if pool is None:
        outcomes = [pipeline.run_job(j, file.content_hash) for j in jobs]
    else:
        futures = [pool.submit(pipeline.run_job, j, file.content_hash) for j in jobs]
        outcomes = [f.result() for f in futures]
    return outcomes, warnings


def scan_file(file: SourceFile, cfg: ScanConfig, rules: Sequence[IndicatorRule], backend: AnalysisBackend,
              cache: Optional[ResultCache] = None) -> list[ComponentOutcome]:
    """Run both phases over one file; backend failures degrade single components."""
    pipeline = Pipeline(cfg, rules, backend, cache)
    with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
        outcomes, _ = _scan_file(pipeline, file, pool)
    return outcomes


# -- tree walking --------------------------------------------------------------


def _excluded(rel: str, patterns: Sequence[str]) -> bool:
    parts = rel.split("/")
    return any(fnmatch(rel, p) or any(fnmatch(part, p) for part in parts) for p in patterns)


def _included(rel: str, patterns: Sequence[str]) -> bool:
    name = rel.rsplit("/", 1)[-1]
    return any(fnmatch(rel, p) or fnmatch(name, p) for p in patterns)


def collect_paths(root: Path, cfg: ScanConfig) -> list[str]:
    """Relative POSIX paths under ``root`` selected by the include/exclude globs."""
    if root.is_file():
        return [root.name]
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        rel_dir = Path(dirpath).relative_to(root).as_posix()
        rel_dir = "" if rel_dir == "." else rel_dir + "/"
        dirnames[:] = sorted(d for d in dirnames if not _excluded(rel_dir + d, cfg.exclude))
        for name in filenames:
            rel = rel_dir + name
            if _included(rel, cfg.include) and not _excluded(rel, cfg.exclude):
                found.append(rel)
    return sorted(found)


def _timestamp(clock: Optional[Callable[[], float]]) -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None and clock is None:
        seconds = float(int(epoch))
    else:
        seconds = (clock or time.time)()
    return datetime.fromtimestamp(seconds, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def scan_tree(root, cfg: ScanConfig, rules: Sequence[IndicatorRule], backend: AnalysisBackend,
              cache: Optional[ResultCache] = None, clock: Optional[Callable[[], float]] = None) -> ScanReport:
    """Scan every selected file under ``root`` (or ``root`` itself if it is a file).

    With ``SOURCE_DATE_EPOCH`` set and no explicit ``clock``, both report
    timestamps are pinned to that value.
    """
    root = Path(root)
    if not root.exists():
        raise RootMissing(f"scan root does not exist: {root}")
    started = _timestamp(clock)
    base = root.parent if root.is_file() else root
    pipeline = Pipeline(cfg, rules, backend, cache)

    files: list[FileReport] = []
    errors: list[ScanError] = []
    with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
        pending = []
        for rel in collect_paths(root, cfg):
            try:
                file = read_source(base, rel)
            except FileUnreadable as exc:
                errors.append(ScanError(rel, str(exc)))
                continue
            if file is None:
                logger.info("skipping binary file %s", rel)
                continue
            jobs, warnings = pipeline.plan(file)
            futures = [pool.submit(pipeline.run_job, j, file.content_hash) for j in jobs]
            pending.append((file, warnings, futures))
        for file, warnings, futures in pending:
            records = tuple(ComponentRecord.from_outcome(f.result()) for f in futures)
            files.append(FileReport(file.path, file.language, file.content_hash, records,
                                    tuple(file.warnings) + tuple(warnings)))
    return ScanReport(
        tool_version=__version__,
        started_at=started,
        finished_at=_timestamp(clock),
        config_digest=cfg.digest(),
        backend_id=backend.backend_id,
        template_version=backend.template_version,
        rule_set_digest=pipeline.rules_digest,
        flag_threshold=float(cfg.flag_threshold),
        token_budget=cfg.token_budget,
        files=tuple(files),
        errors=tuple(errors),
    )
