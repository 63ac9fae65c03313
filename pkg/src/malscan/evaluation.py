"""Detection and remediation tallies over labelled mini-project corpora.

A corpus directory holds one sub-directory per project plus a
``manifests/`` directory with one YAML manifest per project and an
optional ``annotations.yaml`` of manual remediation labels::

    corpus/
      notes-app/...
      manifests/notes-app.yaml
      manifests/annotations.yaml
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .backends import AnalysisBackend, RuleBackend
from .config import ScanConfig
from .orchestrator import scan_tree
from .prescore import IndicatorRule, VulnCategory, bundled_rules
from .report import ScanReport

PROFILES = ("secure", "insecure", "mixed")
LABELS = ("specific", "generic")
MANIFEST_DIR = "manifests"
ANNOTATIONS_FILE = "annotations.yaml"

_ENTRY_FIELDS = {"id", "file", "lines", "category"}
_MANIFEST_FIELDS = {"project_id", "security_profile", "language", "entries"}


class ManifestError(ValueError):
    """A manifest or annotations file is malformed."""


class ManifestMismatch(ManifestError):
    """A manifest names a file that the corpus or report does not contain."""


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    file: str
    lines: tuple[int, int]  # 1-based, inclusive
    category: VulnCategory

    def overlaps(self, start_line: int, end_line: int) -> bool:
        return start_line <= self.lines[1] and self.lines[0] <= end_line


@dataclass(frozen=True)
class CorpusManifest:
    project_id: str
    security_profile: str
    language: str
    entries: tuple[CorpusEntry, ...] = ()

    def __post_init__(self) -> None:
        if self.security_profile not in PROFILES:
            raise ManifestError(f"{self.project_id}: security_profile must be one of {', '.join(PROFILES)}")
        if self.security_profile == "secure" and self.entries:
            raise ManifestError(f"{self.project_id}: a secure project cannot list vulnerabilities")
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ManifestError(f"{self.project_id}: duplicate entry id")


def _entry(project: str, raw) -> CorpusEntry:
    if not isinstance(raw, dict):
        raise ManifestError(f"{project}: each entry must be a mapping")
    missing = _ENTRY_FIELDS - set(raw)
    extra = set(raw) - _ENTRY_FIELDS
    if missing or extra:
        raise ManifestError(f"{project}: entry fields must be exactly {', '.join(sorted(_ENTRY_FIELDS))}")
    lines = raw["lines"]
    if (not isinstance(lines, list) or len(lines) != 2 or not all(isinstance(n, int) for n in lines)
            or not 1 <= lines[0] <= lines[1]):
        raise ManifestError(f"{project}: entry {raw['id']}: lines must be [start, end] with 1 <= start <= end")
    try:
        category = VulnCategory(raw["category"])
    except ValueError:
        raise ManifestError(f"{project}: entry {raw['id']}: unknown category {raw['category']!r}") from None
    return CorpusEntry(str(raw["id"]), str(raw["file"]), (lines[0], lines[1]), category)


def manifest_from_mapping(data) -> CorpusManifest:
    if not isinstance(data, dict) or set(data) != _MANIFEST_FIELDS:
        raise ManifestError(f"manifest must have exactly the keys {', '.join(sorted(_MANIFEST_FIELDS))}")
    project = str(data["project_id"])
    if not isinstance(data["entries"], list):
        raise ManifestError(f"{project}: entries must be a list")
    entries = tuple(_entry(project, e) for e in data["entries"])
    return CorpusManifest(project, str(data["security_profile"]), str(data["language"]), entries)


def load_manifest(path) -> CorpusManifest:
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ManifestError(f"invalid YAML in {path}: {exc}") from None
    return manifest_from_mapping(data)


def load_annotations(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    labels = data.get("remediation", {}) if isinstance(data, dict) else None
    if not isinstance(labels, dict) or any(v not in LABELS for v in labels.values()):
        raise ManifestError(f"{path}: remediation labels must map entry ids to specific or generic")
    return {str(k): v for k, v in labels.items()}


def check_files(manifest: CorpusManifest, project_root) -> None:
    root = Path(project_root)
    missing = sorted({e.file for e in manifest.entries if not (root / e.file).is_file()})
    if missing:
        raise ManifestMismatch(f"{manifest.project_id}: missing file(s): {', '.join(missing)}")


# -- matching -------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectResult:
    project_id: str
    security_profile: str
    true_positives: int
    false_negatives: int
    false_positives: int
    matched: tuple[str, ...] = ()  # entry ids
    missed: tuple[str, ...] = ()  # entry ids
    spurious: tuple[str, ...] = ()  # "file:component:category"
    specific: int = 0
    generic: int = 0

    @property
    def recall(self) -> float:
        found = self.true_positives + self.false_negatives
        return self.true_positives / found if found else 1.0

    @property
    def precision(self) -> float:
        flagged = self.true_positives + self.false_positives
        return self.true_positives / flagged if flagged else 1.0

    def to_dict(self) -> dict:
        return {
            "project_id": self.project_id,
            "security_profile": self.security_profile,
            "true_positives": self.true_positives,
            "false_negatives": self.false_negatives,
            "false_positives": self.false_positives,
            "recall": round(self.recall, 4),
            "precision": round(self.precision, 4),
            "matched": list(self.matched),
            "missed": list(self.missed),
            "spurious": list(self.spurious),
            "remediation": {"specific": self.specific, "generic": self.generic},
        }


@dataclass(frozen=True)
class EvalResult:
    projects: tuple[ProjectResult, ...] = field(default_factory=tuple)

    def profile(self, name: str) -> ProjectResult:
        """Sum of the projects with the given security profile."""
        picked = [p for p in self.projects if p.security_profile == name]
        return ProjectResult(
            name, name,
            sum(p.true_positives for p in picked),
            sum(p.false_negatives for p in picked),
            sum(p.false_positives for p in picked),
            tuple(m for p in picked for m in p.matched),
            tuple(m for p in picked for m in p.missed),
            tuple(s for p in picked for s in p.spurious),
            sum(p.specific for p in picked),
            sum(p.generic for p in picked),
        )

    @property
    def specific(self) -> int:
        return sum(p.specific for p in self.projects)

    @property
    def generic(self) -> int:
        return sum(p.generic for p in self.projects)

    def to_dict(self) -> dict:
        return {
            "projects": [p.to_dict() for p in self.projects],
            "by_profile": {name: self.profile(name).to_dict() for name in PROFILES},
            "remediation": {"specific": self.specific, "generic": self.generic},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def match_project(report: ScanReport, manifest: CorpusManifest,
                  annotations: Optional[dict[str, str]] = None) -> ProjectResult:
    """One-to-one matching of findings to ground-truth entries.

    Findings are taken in descending score order and each claims the first
    unclaimed entry with the same file and category whose line range
    overlaps the finding's component.
    """
    scanned = {f.path for f in report.files}
    missing = sorted({e.file for e in manifest.entries} - scanned)
    if missing:
        raise ManifestMismatch(f"{manifest.project_id}: report has no file(s): {', '.join(missing)}")

    candidates = []
    for f in report.files:
        for c in f.components:
            if c.detection is None:
                continue
            for finding in c.detection.findings:
                candidates.append((f.path, c, finding))
    candidates.sort(key=lambda t: (-t[2].score.value, t[0], t[1].start_line, t[1].id, t[2].category.value))

    claimed: dict[str, bool] = {}
    spurious = []
    for path, c, finding in candidates:
        hit = next((e for e in manifest.entries
                    if e.id not in claimed and e.file == path and e.category is finding.category
                    and e.overlaps(c.start_line, c.end_line)), None)
        if hit is None:
            spurious.append(f"{path}:{c.name}:{finding.category.value}")
        else:
            claimed[hit.id] = True

    matched = tuple(e.id for e in manifest.entries if e.id in claimed)
    missed = tuple(e.id for e in manifest.entries if e.id not in claimed)
    labels = [(annotations or {}).get(i) for i in matched]
    return ProjectResult(
        manifest.project_id,
        manifest.security_profile,
        true_positives=len(matched),
        false_negatives=len(missed),
        false_positives=len(spurious),
        matched=matched,
        missed=missed,
        spurious=tuple(spurious),
        specific=labels.count("specific"),
        generic=labels.count("generic"),
    )


def match_findings(report: ScanReport, manifest: CorpusManifest,
                   annotations: Optional[dict[str, str]] = None) -> EvalResult:
    return EvalResult((match_project(report, manifest, annotations),))


# -- bundled corpus -------------------------------------------------------------


def _copy_tree(src, dest: Path) -> int:
    count = 0
    for item in sorted(src.iterdir(), key=lambda p: p.name):
        if item.name.startswith(".") or item.name == "__pycache__":
            continue
        target = dest / item.name
        if item.is_dir():
            target.mkdir(parents=True, exist_ok=True)
            count += _copy_tree(item, target)
        else:
            target.write_bytes(item.read_bytes())
            count += 1
    return count


def build_bundled_corpus(dest) -> Path:
    """Write the four bundled projects and their manifests under ``dest``."""
    dest = Path(dest)
    data = resources.files("malscan").joinpath("data")
    (dest / MANIFEST_DIR).mkdir(parents=True, exist_ok=True)
    _copy_tree(data.joinpath("corpus"), dest)
    _copy_tree(data.joinpath("manifests"), dest / MANIFEST_DIR)
    return dest


def corpus_manifests(corpus_root) -> list[CorpusManifest]:
    folder = Path(corpus_root) / MANIFEST_DIR
    paths = sorted(p for p in folder.glob("*.yaml") if p.name != ANNOTATIONS_FILE)
    return [load_manifest(p) for p in paths]


def run_eval(corpus_root, cfg: Optional[ScanConfig] = None, backend: Optional[AnalysisBackend] = None,
             rules: Optional[Sequence[IndicatorRule]] = None) -> EvalResult:
    """Scan every project under ``corpus_root`` and match against its manifest.

    Remediation labels are only tallied when the rule backend is used,
    since the annotations describe that backend's output.
    """
    root = Path(corpus_root)
    cfg = cfg or ScanConfig()
    rules = list(rules) if rules is not None else bundled_rules()
    backend = backend or RuleBackend(rules)
    labels_path = root / MANIFEST_DIR / ANNOTATIONS_FILE
    annotations = None
    if isinstance(backend, RuleBackend) and labels_path.is_file():
        annotations = load_annotations(labels_path)
    results = []
    for manifest in corpus_manifests(root):
        project = root / manifest.project_id
        check_files(manifest, project)
        report = scan_tree(project, cfg, rules, backend)
        results.append(match_project(report, manifest, annotations))
    return EvalResult(tuple(results))


def format_table(result: EvalResult) -> str:
    head = f"{'project':<20} {'profile':<9} {'TP':>3} {'FN':>3} {'FP':>3} {'recall':>7} {'precision':>9}"
    rows = [head, "-" * len(head)]

    def row(p: ProjectResult) -> str:
        return (f"{p.project_id:<20} {p.security_profile:<9} {p.true_positives:>3} {p.false_negatives:>3} "
                f"{p.false_positives:>3} {p.recall:>7.3f} {p.precision:>9.3f}")

    rows.extend(row(p) for p in result.projects)
    rows.append("-" * len(head))
    rows.extend(row(result.profile(name)) for name in PROFILES)
    rows.append("")
    rows.append(f"remediation: {result.specific} specific, {result.generic} generic")
    return "\n".join(rows) + "\n"
