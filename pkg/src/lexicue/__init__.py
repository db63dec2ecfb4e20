"""Live lexical cues for STEM lectures.

Spots glossary terms in a streaming lecture transcript and delivers short
explanations in each student's preferred language.
"""

from .glossary import (
    CompiledGlossary,
    Diagnostic,
    GlossaryEntry,
    LookupResult,
    compile_glossary,
    load_glossary,
    lookup,
    validate_entries,
    validate_glossary,
)
from .ingest import (
    Token,
    TranscriptEvent,
    UtteranceUpdate,
    normalize_text,
    parse_transcript_line,
    format_transcript_line,
    sequence_events,
)
from .spotter import (
    CooldownDecision,
    CooldownLedger,
    CueRecord,
    Match,
    Retraction,
    SpotPipeline,
    StreamMatcher,
    TermPattern,
    TokenAutomaton,
    build_automaton,
    fuzzy_match_token,
    select_matches,
)
from .engine import LectureEngine, replay_events
from .discovery import discover_candidates

__all__ = [
    "CompiledGlossary",
    "CooldownDecision",
    "CooldownLedger",
    "CueRecord",
    "Diagnostic",
    "GlossaryEntry",
    "LectureEngine",
    "LookupResult",
    "Match",
    "Retraction",
    "SpotPipeline",
    "StreamMatcher",
    "TermPattern",
    "Token",
    "TokenAutomaton",
    "TranscriptEvent",
    "UtteranceUpdate",
    "build_automaton",
    "compile_glossary",
    "discover_candidates",
    "format_transcript_line",
    "fuzzy_match_token",
    "load_glossary",
    "lookup",
    "normalize_text",
    "parse_transcript_line",
    "replay_events",
    "select_matches",
    "sequence_events",
    "validate_entries",
    "validate_glossary",
]
