"""CVSS v3.1 base metrics: vector parsing, rendering and base-score computation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

PREFIX = "CVSS:3.1"
METRIC_ORDER = ("AV", "AC", "PR", "UI", "S", "C", "I", "A")

_VALUES = {
    "AV": ("N", "A", "L", "P"),
    "AC": ("L", "H"),
    "PR": ("N", "L", "H"),
    "UI": ("N", "R"),
    "S": ("U", "C"),
    "C": ("N", "L", "H"),
    "I": ("N", "L", "H"),
    "A": ("N", "L", "H"),
}

_AV = {"N": 0.85, "A": 0.62, "L": 0.55, "P": 0.2}
_AC = {"L": 0.77, "H": 0.44}
_UI = {"N": 0.85, "R": 0.62}
_CIA = {"N": 0.0, "L": 0.22, "H": 0.56}
_PR_UNCHANGED = {"N": 0.85, "L": 0.62, "H": 0.27}
_PR_CHANGED = {"N": 0.85, "L": 0.68, "H": 0.5}


class MalformedVector(ValueError):
    """Raised for vector strings that are not valid CVSS v3.1 base vectors."""

    def __init__(self, position: int, reason: str):
        super().__init__(f"malformed CVSS vector at position {position}: {reason}")
        self.position = position
        self.reason = reason


class Severity(str, Enum):
    NONE = "None"
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"
    CRITICAL = "Critical"

    @classmethod
    def for_score(cls, value: float) -> "Severity":
        if value == 0.0:
            return cls.NONE
        if value < 4.0:
            return cls.LOW
        if value < 7.0:
            return cls.MEDIUM
        if value < 9.0:
            return cls.HIGH
        return cls.CRITICAL


@dataclass(frozen=True)
class CvssVector:
    """The eight CVSS v3.1 base metrics, each held as its one-letter code."""

    attack_vector: str = "N"
    attack_complexity: str = "L"
    privileges_required: str = "N"
    user_interaction: str = "N"
    scope: str = "U"
    confidentiality: str = "N"
    integrity: str = "N"
    availability: str = "N"

    def __post_init__(self) -> None:
        for metric, value in zip(METRIC_ORDER, self.metrics()):
            if value not in _VALUES[metric]:
                raise ValueError(f"invalid value {value!r} for metric {metric}")

    def metrics(self) -> tuple[str, ...]:
        return (
            self.attack_vector,
            self.attack_complexity,
            self.privileges_required,
            self.user_interaction,
            self.scope,
            self.confidentiality,
            self.integrity,
            self.availability,
        )

    def render(self) -> str:
        parts = [f"{m}:{v}" for m, v in zip(METRIC_ORDER, self.metrics())]
        return "/".join([PREFIX, *parts])

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class CvssScore:
    value: float
    severity: Severity

    @classmethod
    def of(cls, value: float) -> "CvssScore":
        return cls(value, Severity.for_score(value))


ZERO = CvssScore(0.0, Severity.NONE)


def parse_vector(text: str) -> CvssVector:
    """Parse ``CVSS:3.1/AV:_/AC:_/...``; metrics may come in any order."""
    if not text.startswith(PREFIX + "/"):
        raise MalformedVector(0, f"expected prefix {PREFIX!r}/")
    seen: dict[str, str] = {}
    pos = len(PREFIX) + 1
    for part in text[pos:].split("/"):
        metric, sep, value = part.partition(":")
        if not sep:
            raise MalformedVector(pos, f"expected METRIC:VALUE, got {part!r}")
        if metric not in _VALUES:
            raise MalformedVector(pos, f"unknown metric {metric!r}")
        if metric in seen:
            raise MalformedVector(pos, f"duplicate metric {metric!r}")
        if value not in _VALUES[metric]:
            raise MalformedVector(pos + len(metric) + 1, f"invalid value {value!r} for {metric}")
        seen[metric] = value
        pos += len(part) + 1
    missing = [m for m in METRIC_ORDER if m not in seen]
    if missing:
        raise MalformedVector(len(text), "missing metrics " + ", ".join(missing))
    return CvssVector(*(seen[m] for m in METRIC_ORDER))


def roundup(value: float) -> float:
    """Smallest number with one decimal place that is >= ``value``.

    Integer formulation from the CVSS v3.1 specification appendix, which
    sidesteps float noise such as 4.000000000000001 rounding up to 4.1.
    """
    scaled = round(value * 100_000)
    if scaled % 10_000 == 0:
        return scaled / 100_000.0
    return (math.floor(scaled / 10_000) + 1) / 10.0


def impact_subscore(v: CvssVector) -> float:
    iss = 1 - (1 - _CIA[v.confidentiality]) * (1 - _CIA[v.integrity]) * (1 - _CIA[v.availability])
    if v.scope == "U":
        return 6.42 * iss
    return 7.52 * (iss - 0.029) - 3.25 * (iss - 0.02) ** 15


def exploitability_subscore(v: CvssVector) -> float:
    pr = (_PR_UNCHANGED if v.scope == "U" else _PR_CHANGED)[v.privileges_required]
    return 8.22 * _AV[v.attack_vector] * _AC[v.attack_complexity] * pr * _UI[v.user_interaction]


def base_score(v: CvssVector) -> CvssScore:
    impact = impact_subscore(v)
    if impact <= 0:
        return ZERO
    total = impact + exploitability_subscore(v)
    if v.scope == "C":
        total *= 1.08
    return CvssScore.of(roundup(min(total, 10.0)))


def all_vectors():
    """Yield every one of the 2,592 base-metric combinations."""
    for combo in itertools.product(*(_VALUES[m] for m in METRIC_ORDER)):
        yield CvssVector(*combo)
