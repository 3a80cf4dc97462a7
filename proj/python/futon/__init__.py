"""Python bindings for the futon pattern engine."""

from ._core import (
    TRACE_SCHEMA_VERSION,
    Diagnostic,
    FutonError,
    Maturity,
    PatternDocument,
    PatternLibrary,
    TraceCorrupt,
    classify,
    classify_presence,
    expected_free_energy,
    lint_pattern,
    load_library,
    parse_pattern,
    relevance,
    replay,
    run_simulation,
    sample_selection,
    selection_distribution,
    serialize_pattern,
)

__all__ = [
    "TRACE_SCHEMA_VERSION",
    "Diagnostic",
    "FutonError",
    "Maturity",
    "PatternDocument",
    "PatternLibrary",
    "TraceCorrupt",
    "classify",
    "classify_presence",
    "expected_free_energy",
    "lint_pattern",
    "load_library",
    "parse_pattern",
    "relevance",
    "replay",
    "run_simulation",
    "sample_selection",
    "selection_distribution",
    "serialize_pattern",
]
