"""Supported-language registry and extension-based detection."""

from __future__ import annotations

from enum import Enum
from pathlib import PurePath


class LanguageId(str, Enum):
    PYTHON = "python"
    JAVA = "java"
    C = "c"
    CPP = "cpp"
    RUST = "rust"
    GO = "go"
    SCALA = "scala"
    JAVASCRIPT = "javascript"
    TYPESCRIPT = "typescript"
    PHP = "php"
    RUBY = "ruby"
    CSHARP = "csharp"
    KOTLIN = "kotlin"
    SWIFT = "swift"
    UNKNOWN = "unknown"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "LanguageId":
        """Look up a language by its serialized name or a common alias."""
        key = name.strip().lower()
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown language: {name!r}") from None


REGISTERED: tuple[LanguageId, ...] = tuple(l for l in LanguageId if l is not LanguageId.UNKNOWN)

_ALIASES = {
    "py": "python",
    "c++": "cpp",
    "cxx": "cpp",
    "js": "javascript",
    "ts": "typescript",
    "rb": "ruby",
    "c#": "csharp",
    "cs": "csharp",
    "kt": "kotlin",
    "golang": "go",
    "rs": "rust",
}

EXTENSIONS: dict[str, LanguageId] = {
    ".py": LanguageId.PYTHON,
    ".pyw": LanguageId.PYTHON,
    ".java": LanguageId.JAVA,
    ".c": LanguageId.C,
    ".h": LanguageId.C,
    ".cc": LanguageId.CPP,
    ".cpp": LanguageId.CPP,
    ".cxx": LanguageId.CPP,
    ".hpp": LanguageId.CPP,
    ".hh": LanguageId.CPP,
    ".hxx": LanguageId.CPP,
    ".rs": LanguageId.RUST,
    ".go": LanguageId.GO,
    ".scala": LanguageId.SCALA,
    ".sc": LanguageId.SCALA,
    ".js": LanguageId.JAVASCRIPT,
    ".mjs": LanguageId.JAVASCRIPT,
    ".cjs": LanguageId.JAVASCRIPT,
    ".jsx": LanguageId.JAVASCRIPT,
    ".ts": LanguageId.TYPESCRIPT,
    ".tsx": LanguageId.TYPESCRIPT,
    ".mts": LanguageId.TYPESCRIPT,
    ".php": LanguageId.PHP,
    ".rb": LanguageId.RUBY,
    ".cs": LanguageId.CSHARP,
    ".kt": LanguageId.KOTLIN,
    ".kts": LanguageId.KOTLIN,
    ".swift": LanguageId.SWIFT,
}


def detect_language(path: str, override: LanguageId | str | None = None) -> LanguageId:
    """Return the language for ``path``.

    An explicit ``override`` always wins; otherwise the file extension is
    looked up (case-insensitively) and anything unmapped is ``UNKNOWN``.
    """
    if not path:
        raise ValueError("path must be non-empty")
    if override is not None:
        return override if isinstance(override, LanguageId) else LanguageId.parse(override)
    return EXTENSIONS.get(PurePath(path).suffix.lower(), LanguageId.UNKNOWN)
