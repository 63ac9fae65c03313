"""Scan configuration: defaults, YAML config file and digest."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Optional

import yaml

from .backends import DEFAULT_TOKEN_BUDGET
from .componentizer import DEFAULT_FRAGMENT_BYTES
from .languages import EXTENSIONS
from .prescore import DEFAULT_FLAG_THRESHOLD

DEFAULT_INCLUDE = tuple(sorted(f"*{ext}" for ext in EXTENSIONS))
DEFAULT_EXCLUDE = (".git", ".hg", ".svn", "node_modules", "__pycache__", ".venv", "venv", ".tox", ".malscan-cache")
BACKENDS = ("rules", "model")

# fields that cannot change report content are left out of the digest
_NOT_DIGESTED = {"max_parallel", "cache_dir", "fail_threshold", "rule_set_path"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScanConfig:
    flag_threshold: float = DEFAULT_FLAG_THRESHOLD
    token_budget: int = DEFAULT_TOKEN_BUDGET
    max_parallel: int = 4
    backend: str = "rules"
    force_analyze_all: bool = False
    full_report: bool = False
    rule_set_path: Optional[str] = None
    include: tuple[str, ...] = DEFAULT_INCLUDE
    exclude: tuple[str, ...] = DEFAULT_EXCLUDE
    fragment_bytes: int = DEFAULT_FRAGMENT_BYTES
    fail_threshold: float = 7.0
    cache_dir: Optional[str] = None
    model: dict = field(default_factory=dict)  # ModelConfig options

    def __post_init__(self) -> None:
        if not 0.0 <= self.flag_threshold <= 10.0:
            raise ConfigError("flag_threshold must be within [0.0, 10.0]")
        if not 0.0 <= self.fail_threshold <= 10.0:
            raise ConfigError("fail_threshold must be within [0.0, 10.0]")
        if self.token_budget <= 0:
            raise ConfigError("token_budget must be positive")
        if self.max_parallel < 1:
            raise ConfigError("max_parallel must be at least 1")
        if self.fragment_bytes <= 0:
            raise ConfigError("fragment_bytes must be positive")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {', '.join(BACKENDS)}")
        object.__setattr__(self, "include", tuple(self.include))
        object.__setattr__(self, "exclude", tuple(self.exclude))

    def with_overrides(self, **overrides: Any) -> "ScanConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def digest(self) -> str:
        data = {k: v for k, v in asdict(self).items() if k not in _NOT_DIGESTED}
        data["model"] = {k: v for k, v in self.model.items() if k in ("endpoint", "model", "temperature")}
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def config_from_mapping(data: dict) -> ScanConfig:
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping")
    names = {f.name for f in fields(ScanConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    values = dict(data)
    for key in ("include", "exclude"):
        if key in values:
            if not isinstance(values[key], list) or not all(isinstance(x, str) for x in values[key]):
                raise ConfigError(f"{key} must be a list of glob strings")
            values[key] = tuple(values[key])
    if "model" in values and not isinstance(values["model"], dict):
        raise ConfigError("model must be a mapping")
    try:
        return ScanConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ScanConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    return config_from_mapping(data or {})
