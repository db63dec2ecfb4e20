"""Transcript ingestion boundary.

External ASR engines (or replay files) talk to the system through a
tab-separated line protocol, one utterance hypothesis per line:

    start_ms<TAB>end_ms<TAB>kind<TAB>utterance_id<TAB>revision<TAB>text

where kind is ``partial`` or ``final``. Tabs and LF are forbidden inside
``text``; producers must replace them with spaces. This module parses that
protocol, normalizes hypothesis text into a stable token stream, and
enforces per-session event ordering so downstream matching only ever sees
a consistent view of each utterance.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Literal

EventKind = Literal["partial", "final"]

_KINDS = ("partial", "final")


class MalformedLine(ValueError):
    """A transcript line does not conform to the line protocol."""


class SequenceError(Exception):
    """Base for event-ordering violations; the offending event is dropped."""

    def __init__(self, message: str, event: "TranscriptEvent"):
        super().__init__(message)
        self.event = event


class OutOfOrderRevision(SequenceError):
    """Revision or utterance_id went backwards for a session stream."""


class EventAfterFinal(SequenceError):
    """An event arrived for an utterance that was already finalized."""


@dataclass(frozen=True)
class TranscriptEvent:
    """One timestamped partial/final ASR hypothesis for an utterance.

    ``session_id`` and ``confidence`` are not part of the line protocol;
    they are attached by the receiving context (the session an ingest
    stream belongs to, or an engine-specific side channel).
    """

    utterance_id: int
    revision: int
    kind: EventKind
    start_ms: int
    end_ms: int
    text: str
    session_id: str = ""
    confidence: float | None = None

    @property
    def is_final(self) -> bool:
        return self.kind == "final"


@dataclass(frozen=True)
class Token:
    """One normalized token with offsets into the original utterance text."""

    surface: str
    normalized: str
    char_start: int
    char_end: int
    start_ms: int
    end_ms: int
    confidence: float | None = None


@dataclass(frozen=True)
class UtteranceUpdate:
    """Current state of one utterance after applying a revision.

    A revision fully replaces the previous hypothesis for its utterance,
    so ``tokens`` is always the complete token sequence, never a delta.
    """

    session_id: str
    utterance_id: int
    revision: int
    finalized: bool
    tokens: tuple[Token, ...]
    event: TranscriptEvent


def parse_transcript_line(line: str) -> TranscriptEvent:
    """Parse one protocol line into a TranscriptEvent.

    Raises MalformedLine on wrong field count, non-numeric or negative
    timestamps/ids, an unknown kind, or an inverted time span. Text is
    preserved verbatim.
    """
    line = line.rstrip("\n")
    fields = line.split("\t")
    if len(fields) != 6:
        raise MalformedLine(f"expected 6 tab-separated fields, got {len(fields)}")
    raw_start, raw_end, kind, raw_utt, raw_rev, text = fields
    try:
        start_ms = int(raw_start)
        end_ms = int(raw_end)
        utterance_id = int(raw_utt)
        revision = int(raw_rev)
    except ValueError as exc:
        raise MalformedLine(f"non-numeric field: {exc}") from None
    if kind not in _KINDS:
        raise MalformedLine(f"unknown kind {kind!r}")
    if start_ms < 0 or end_ms < 0:
        raise MalformedLine("negative timestamp")
    if end_ms < start_ms:
        raise MalformedLine(f"end_ms {end_ms} precedes start_ms {start_ms}")
    if utterance_id < 0 or revision < 0:
        raise MalformedLine("negative utterance_id or revision")
    return TranscriptEvent(
        utterance_id=utterance_id,
        revision=revision,
        kind=kind,  # type: ignore[arg-type]
        start_ms=start_ms,
        end_ms=end_ms,
        text=text,
    )


def format_transcript_line(event: TranscriptEvent) -> str:
    """Serialize an event back to the line protocol (no trailing LF)."""
    if "\t" in event.text or "\n" in event.text:
        raise MalformedLine("text may not contain tabs or newlines")
    return (
        f"{event.start_ms}\t{event.end_ms}\t{event.kind}"
        f"\t{event.utterance_id}\t{event.revision}\t{event.text}"
    )


def _is_token_char(ch: str) -> bool:
    # Letters, digits, and combining marks stay inside tokens; everything
    # else (whitespace, hyphens, punctuation, symbols) separates.
    return unicodedata.category(ch)[0] in ("L", "N", "M")


def fold_token(surface: str) -> str:
    """Canonical matching form of a token: NFC-normalized, case-folded."""
    return unicodedata.normalize("NFC", unicodedata.normalize("NFC", surface).casefold())


def normalize_text(
    text: str,
    start_ms: int = 0,
    end_ms: int = 0,
    confidence: float | None = None,
) -> list[Token]:
    """Split text into normalized tokens with offsets and interpolated timing.

    Splits on whitespace, hyphens, and any other punctuation or symbol
    character, so "Back-Propagation!" yields ["back", "propagation"].
    Offsets index the original string; token times are linearly
    interpolated between start_ms and end_ms by character position.
    """
    tokens: list[Token] = []
    n = len(text)
    span = end_ms - start_ms
    i = 0
    while i < n:
        if not _is_token_char(text[i]):
            i += 1
            continue
        j = i + 1
        while j < n and _is_token_char(text[j]):
            j += 1
        surface = text[i:j]
        tokens.append(
            Token(
                surface=surface,
                normalized=fold_token(surface),
                char_start=i,
                char_end=j,
                start_ms=start_ms + (span * i) // n,
                end_ms=start_ms + (span * j) // n,
                confidence=confidence,
            )
        )
        i = j
    return tokens


def tokenize_event(event: TranscriptEvent) -> tuple[Token, ...]:
    return tuple(
        normalize_text(event.text, event.start_ms, event.end_ms, event.confidence)
    )


@dataclass
class _UtteranceState:
    last_revision: int
    finalized: bool


class Sequencer:
    """Enforces event ordering for one session stream.

    push() either returns the utterance's new state as an UtteranceUpdate
    or raises a SequenceError; on error the event is dropped and the
    sequencer is unchanged, so the stream can continue.
    """

    def __init__(self, session_id: str = ""):
        self.session_id = session_id
        self._utterances: dict[int, _UtteranceState] = {}
        self._max_utterance_id: int | None = None

    def push(self, event: TranscriptEvent) -> UtteranceUpdate:
        utt = event.utterance_id
        state = self._utterances.get(utt)
        if state is None:
            if self._max_utterance_id is not None and utt < self._max_utterance_id:
                raise OutOfOrderRevision(
                    f"utterance {utt} after {self._max_utterance_id}"
                    " (ids must be non-decreasing)",
                    event,
                )
        else:
            if state.finalized:
                raise EventAfterFinal(f"utterance {utt} already finalized", event)
            if event.revision <= state.last_revision:
                raise OutOfOrderRevision(
                    f"utterance {utt} revision {event.revision}"
                    f" after {state.last_revision}",
                    event,
                )
        self._utterances[utt] = _UtteranceState(
            last_revision=event.revision, finalized=event.is_final
        )
        if self._max_utterance_id is None or utt > self._max_utterance_id:
            self._max_utterance_id = utt
        return UtteranceUpdate(
            session_id=self.session_id or event.session_id,
            utterance_id=utt,
            revision=event.revision,
            finalized=event.is_final,
            tokens=tokenize_event(event),
            event=event,
        )


def sequence_events(
    events: Iterable[TranscriptEvent],
    session_id: str = "",
    on_error: Callable[[SequenceError], None] | None = None,
) -> Iterator[UtteranceUpdate]:
    """Sequence a whole event stream, dropping out-of-order events.

    Dropped events are reported through on_error; the stream continues.
    """
    sequencer = Sequencer(session_id)
    for event in events:
        try:
            yield sequencer.push(event)
        except SequenceError as err:
            if on_error is not None:
                on_error(err)


def read_transcript_file(path) -> Iterator[TranscriptEvent]:
    """Parse a replay file (one protocol line per event), skipping blanks.

    Raises MalformedLine annotated with the 1-based line number.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                yield parse_transcript_line(line)
            except MalformedLine as exc:
                raise MalformedLine(f"line {lineno}: {exc}") from None
