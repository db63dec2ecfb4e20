"""Pre-computed multilingual glossary: storage, validation, compile, lookup.

Storage is UTF-8 JSON Lines, one entry per line:

    {"term": "backpropagation",
     "aliases": ["back propagation"],
     "tags": ["ml"],
     "explanations": {"hi": "ek algorithm hai jo ...",
                      "sw": "ni mbinu ya kufundisha ...",
                      "en": "an algorithm that ..."}}

``term`` and a non-empty ``explanations`` object are required; ``aliases``
and ``tags`` default to empty. An optional ``script`` object (language
code -> script name) is carried opaquely. Serialization is canonical
(fixed field order, sorted explanation keys), so byte-identical files
compile to byte-identical artifacts with identical version hashes.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .ingest import fold_token, normalize_text
from .spotter import TermPattern

_LANGUAGE_TAG = re.compile(r"^[A-Za-z]{2,8}(-[A-Za-z0-9]{1,8})*$")

FALLBACK_NONE = "none"
FALLBACK_ENGLISH = "english"
FALLBACK_TERM_ONLY = "term_only"


class ParseError(ValueError):
    """A glossary record is structurally malformed."""

    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class InvalidGlossary(ValueError):
    """Compilation was attempted on entries that fail validation."""

    def __init__(self, diagnostics: Sequence["Diagnostic"]):
        super().__init__(
            "; ".join(f"{d.code}: {d.message}" for d in diagnostics) or "invalid glossary"
        )
        self.diagnostics = list(diagnostics)


class UnknownTerm(LookupError):
    """term_id (or term surface) not present in the compiled glossary."""


@dataclass(frozen=True)
class GlossaryEntry:
    term: str
    aliases: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()
    explanations: Mapping[str, str] = field(default_factory=dict)
    script: Mapping[str, str] = field(default_factory=dict)

    def surfaces(self) -> tuple[str, ...]:
        """Canonical term plus all aliases, in declaration order."""
        return (self.term, *self.aliases)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int | None = None

    def __str__(self) -> str:
        where = f" (line {self.line})" if self.line is not None else ""
        return f"{self.code}: {self.message}{where}"


@dataclass(frozen=True)
class LookupResult:
    term_id: int
    canonical: str
    language_used: str
    explanation: str
    fallback: str  # FALLBACK_NONE | FALLBACK_ENGLISH | FALLBACK_TERM_ONLY


def valid_language_tag(tag: str) -> bool:
    return bool(_LANGUAGE_TAG.match(tag))


def normalize_term(surface: str) -> tuple[str, ...]:
    """Token sequence a surface form matches as (empty if unmatchable)."""
    return tuple(tok.normalized for tok in normalize_text(surface))


def parse_glossary_line(line: str, lineno: int | None = None) -> GlossaryEntry:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
    if not isinstance(raw, dict):
        raise ParseError("record must be a JSON object", lineno)
    unknown = set(raw) - {"term", "aliases", "tags", "explanations", "script"}
    if unknown:
        raise ParseError(f"unknown fields: {sorted(unknown)}", lineno)
    term = raw.get("term")
    if not isinstance(term, str):
        raise ParseError("field 'term' must be a string", lineno)
    aliases = raw.get("aliases", [])
    tags = raw.get("tags", [])
    for name, value in (("aliases", aliases), ("tags", tags)):
        if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
            raise ParseError(f"field {name!r} must be an array of strings", lineno)
    explanations = raw.get("explanations")
    if (
        not isinstance(explanations, dict)
        or not explanations
        or any(not isinstance(k, str) or not isinstance(v, str) for k, v in explanations.items())
    ):
        raise ParseError(
            "field 'explanations' must be a non-empty object of language -> text", lineno
        )
    script = raw.get("script", {})
    if not isinstance(script, dict) or any(
        not isinstance(k, str) or not isinstance(v, str) for k, v in script.items()
    ):
        raise ParseError("field 'script' must be an object of language -> script", lineno)
    return GlossaryEntry(
        term=term,
        aliases=tuple(aliases),
        tags=tuple(tags),
        explanations=dict(explanations),
        script=dict(script),
    )


def serialize_glossary_entry(entry: GlossaryEntry) -> str:
    """Canonical single-line JSON for one entry (no trailing LF)."""
    obj: dict = {
        "term": entry.term,
        "aliases": list(entry.aliases),
        "tags": list(entry.tags),
        "explanations": {k: entry.explanations[k] for k in sorted(entry.explanations)},
    }
    if entry.script:
        obj["script"] = {k: entry.script[k] for k in sorted(entry.script)}
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def parse_glossary(text: str) -> list[GlossaryEntry]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        entries.append(parse_glossary_line(line, lineno))
    return entries


def serialize_glossary(entries: Iterable[GlossaryEntry]) -> str:
    return "".join(serialize_glossary_entry(e) + "\n" for e in entries)


def load_glossary(path) -> list[GlossaryEntry]:
    with open(path, encoding="utf-8") as fh:
        return parse_glossary(fh.read())


def validate_entries(entries: Sequence[GlossaryEntry]) -> list[Diagnostic]:
    """Semantic checks beyond the record schema; empty result means valid.

    Entry positions are reported as 1-based line numbers, which holds for
    files without blank lines (the common case).
    """
    diagnostics: list[Diagnostic] = []
    terms_seen: dict[tuple[str, ...], int] = {}
    for lineno, entry in enumerate(entries, start=1):
        normalized = normalize_term(entry.term)
        if not entry.term or not normalized:
            diagnostics.append(
                Diagnostic("UnmatchableTerm", f"term {entry.term!r} has no tokens", lineno)
            )
            continue
        first = terms_seen.setdefault(normalized, lineno)
        if first != lineno:
            diagnostics.append(
                Diagnostic(
                    "DuplicateTerm",
                    f"term {entry.term!r} duplicates the entry on line {first}",
                    lineno,
                )
            )
    for lineno, entry in enumerate(entries, start=1):
        for lang, text in entry.explanations.items():
            if not valid_language_tag(lang):
                diagnostics.append(
                    Diagnostic("InvalidLanguageCode", f"bad language code {lang!r}", lineno)
                )
            if not text:
                diagnostics.append(
                    Diagnostic(
                        "EmptyExplanation", f"empty explanation for language {lang!r}", lineno
                    )
                )
        for alias in entry.aliases:
            alias_norm = normalize_term(alias)
            if not alias_norm:
                diagnostics.append(
                    Diagnostic("UnmatchableAlias", f"alias {alias!r} has no tokens", lineno)
                )
                continue
            owner = terms_seen.get(alias_norm)
            if owner is not None and owner != lineno:
                diagnostics.append(
                    Diagnostic(
                        "AliasCollision",
                        f"alias {alias!r} collides with the term on line {owner}",
                        lineno,
                    )
                )
    return diagnostics


def validate_glossary(path) -> list[Diagnostic]:
    return validate_entries(load_glossary(path))


class CompiledGlossary:
    """Immutable matcher-ready index over a validated entry set.

    term_ids are assigned in sorted order of the normalized canonical term,
    so the same file always compiles to the same ids and version hash.
    """

    def __init__(self, entries: Sequence[GlossaryEntry]):
        diagnostics = validate_entries(entries)
        if diagnostics:
            raise InvalidGlossary(diagnostics)
        self.entries: tuple[GlossaryEntry, ...] = tuple(
            sorted(entries, key=lambda e: normalize_term(e.term))
        )
        patterns: list[TermPattern] = []
        surface_index: dict[tuple[str, ...], int] = {}
        for term_id, entry in enumerate(self.entries):
            for surface in entry.surfaces():
                token_seq = normalize_term(surface)
                if not token_seq:
                    continue
                existing = surface_index.get(token_seq)
                if existing == term_id:
                    continue  # same entry spelled twice (alias == term)
                if existing is None:
                    surface_index[token_seq] = term_id
                # Cross-entry alias collisions are kept so build_automaton
                # can reject them as DuplicatePattern.
                patterns.append(
                    TermPattern(term_id=term_id, canonical=entry.term, token_seq=token_seq)
                )
        self.patterns: tuple[TermPattern, ...] = tuple(patterns)
        self._surface_index = surface_index
        language_index: dict[str, set[int]] = {}
        self._folded_explanations: list[dict[str, tuple[str, str]]] = []
        for term_id, entry in enumerate(self.entries):
            folded: dict[str, tuple[str, str]] = {}
            for lang, text in entry.explanations.items():
                folded.setdefault(lang.casefold(), (lang, text))
                language_index.setdefault(lang.casefold(), set()).add(term_id)
            self._folded_explanations.append(folded)
        self.language_index: dict[str, frozenset[int]] = {
            lang: frozenset(ids) for lang, ids in language_index.items()
        }
        digest = hashlib.sha256(serialize_glossary(self.entries).encode("utf-8"))
        self.version: str = digest.hexdigest()[:16]

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, term_id: int) -> GlossaryEntry:
        if not 0 <= term_id < len(self.entries):
            raise UnknownTerm(f"term_id {term_id} not in glossary")
        return self.entries[term_id]

    def find_term(self, surface: str) -> int:
        """term_id whose canonical term or alias matches a surface string."""
        term_id = self._surface_index.get(normalize_term(surface))
        if term_id is None:
            raise UnknownTerm(f"no glossary term matches {surface!r}")
        return term_id

    def lookup(self, term_id: int, language: str) -> LookupResult:
        """Resolve an explanation with the requested -> en -> term-only chain."""
        entry = self.entry(term_id)
        folded = self._folded_explanations[term_id]
        hit = folded.get(language.casefold())
        if hit is not None:
            return LookupResult(term_id, entry.term, language, hit[1], FALLBACK_NONE)
        hit = folded.get("en")
        if hit is not None and language.casefold() != "en":
            return LookupResult(term_id, entry.term, "en", hit[1], FALLBACK_ENGLISH)
        return LookupResult(term_id, entry.term, "", "", FALLBACK_TERM_ONLY)


def compile_glossary(entries: Sequence[GlossaryEntry]) -> CompiledGlossary:
    """Compile validated entries; raises InvalidGlossary on diagnostics."""
    return CompiledGlossary(entries)


def lookup(glossary: CompiledGlossary, term_id: int, language: str) -> LookupResult:
    return glossary.lookup(term_id, language)


def write_compiled(glossary: CompiledGlossary, path) -> None:
    """Persist the compiled artifact deterministically."""
    payload = {
        "format": "lexicue.glossary.compiled/1",
        "version": glossary.version,
        "entries": [
            json.loads(serialize_glossary_entry(entry)) for entry in glossary.entries
        ],
        "patterns": [
            {"term_id": p.term_id, "canonical": p.canonical, "tokens": list(p.token_seq)}
            for p in glossary.patterns
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


def load_compiled(path) -> CompiledGlossary:
    """Load a compiled artifact; recompiles and verifies the version hash."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "lexicue.glossary.compiled/1":
        raise ParseError("not a compiled glossary artifact")
    entries = [
        parse_glossary_line(json.dumps(obj, ensure_ascii=False)) for obj in payload["entries"]
    ]
    compiled = CompiledGlossary(entries)
    if compiled.version != payload.get("version"):
        raise ParseError("compiled artifact version hash does not match its entries")
    return compiled
