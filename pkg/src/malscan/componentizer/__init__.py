"""Split source files into independently analyzable components."""

from .decompose import DEFAULT_FRAGMENT_BYTES, decompose, fallback_fragment
from .model import CodeComponent, ComponentKind, ParseFailure, SourceFile, Span, component_id

__all__ = [
    "DEFAULT_FRAGMENT_BYTES",
    "CodeComponent",
    "ComponentKind",
    "ParseFailure",
    "SourceFile",
    "Span",
    "component_id",
    "decompose",
    "fallback_fragment",
]
