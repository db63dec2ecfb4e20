"""Live lecture sessions: ingest, spotting, per-student delivery.

One LectureEngine owns the glossary registry and all sessions. Each
session runs the spotting pipeline serially (guarded by a per-session
lock), assigns session-monotonic cue_ids, appends every emitted cue to an
on-disk cue log, and fans rendered messages out to subscriber queues.

Delivery is per-recipient: one spotted match becomes one cue_id shared by
all subscribers, but each subscriber's message carries the explanation in
its own language. Queues are bounded (drop-oldest) so one stalled reader
can never delay the lecture for everyone else; a dropped stretch is
signalled with a gap notice carrying the next available cue_id, and a
reconnect with resume_from replays retained cues.

All cue decisions run on event time (transcript milliseconds), so a
replayed stream produces the same cues at any replay speed; wall time is
only measured, for the latency statistics.
"""

from __future__ import annotations

import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, IO, Iterable

from .glossary import CompiledGlossary, valid_language_tag
from .ingest import (
    MalformedLine,
    SequenceError,
    TranscriptEvent,
    parse_transcript_line,
)
from .spotter import (
    CueRecord,
    DEFAULT_COOLDOWN_MS,
    MatchMode,
    SpotPipeline,
    TokenAutomaton,
    build_automaton,
    format_cue_line,
)

DEFAULT_QUEUE_BOUND = 256


class EngineError(Exception):
    """Base for session-service errors; maps onto transport error replies."""


class UnknownGlossary(EngineError):
    pass


class InvalidConfig(EngineError):
    pass


class UnknownSession(EngineError):
    pass


class UnknownClient(EngineError):
    pass


class UnknownTermId(EngineError):
    pass


class InvalidLanguage(EngineError):
    pass


class SecondIngestRejected(EngineError):
    pass


@dataclass(frozen=True)
class CoreCue:
    """One emitted cue before per-recipient rendering."""

    cue_id: int
    term_id: int
    canonical: str
    utterance_id: int
    first_token: int
    last_token: int
    start_ms: int
    end_ms: int
    exact: bool

    def record(self) -> CueRecord:
        return CueRecord(
            emit_ms=self.start_ms,
            term_id=self.term_id,
            canonical=self.canonical,
            utterance_id=self.utterance_id,
            first_token=self.first_token,
            last_token=self.last_token,
            exact=self.exact,
        )


@dataclass(frozen=True)
class IngestAck:
    """Outcome of one ingested event: accepted with a cue count, or dropped."""

    utterance_id: int | None
    revision: int | None
    accepted: bool
    cues: int
    error: str | None = None
    detail: str | None = None

    def to_message(self) -> dict:
        if self.accepted:
            return {
                "type": "ack",
                "utterance_id": self.utterance_id,
                "revision": self.revision,
                "cues": self.cues,
            }
        msg = {"type": "drop", "error": self.error, "detail": self.detail}
        if self.utterance_id is not None:
            msg["utterance_id"] = self.utterance_id
            msg["revision"] = self.revision
        return msg


class SubscriberQueue:
    """Bounded FIFO of wire messages with drop-oldest overflow for cues.

    Control messages (welcome, acks, errors) are never dropped. After an
    overflow, the next drain is prefixed with a gap notice naming the
    cue_id the stream resumes at.
    """

    def __init__(self, bound: int = DEFAULT_QUEUE_BOUND):
        self.bound = bound
        self._items: deque[dict] = deque()
        self._cue_count = 0
        self._gap = False
        self._lock = threading.Lock()
        self._notify: Callable[[], None] | None = None

    def set_notifier(self, notify: Callable[[], None] | None) -> None:
        self._notify = notify

    def push(self, message: dict) -> None:
        with self._lock:
            if message.get("type") == "cue":
                if self._cue_count >= self.bound:
                    for i, item in enumerate(self._items):
                        if item.get("type") == "cue":
                            del self._items[i]
                            self._cue_count -= 1
                            self._gap = True
                            break
                self._cue_count += 1
            self._items.append(message)
        if self._notify is not None:
            self._notify()

    def pop(self) -> dict | None:
        """Next message to send, or None when drained.

        A pending gap is emitted right before the cue the stream resumes
        at, so control messages queued ahead of the drop stay in order.
        """
        with self._lock:
            if not self._items:
                return None
            head = self._items[0]
            if self._gap and head.get("type") == "cue":
                self._gap = False
                return {"type": "gap", "next_cue_id": head["cue_id"]}
            self._items.popleft()
            if head.get("type") == "cue":
                self._cue_count -= 1
            return head

    def pop_all(self) -> list[dict]:
        out = []
        while (message := self.pop()) is not None:
            out.append(message)
        return out

    def __len__(self) -> int:
        return len(self._items)


@dataclass
class Subscriber:
    client_id: str
    language: str
    joined_ms: int
    suppressed: set[int]
    queue: SubscriberQueue = field(default_factory=SubscriberQueue)


class _Stats:
    """Running latency samples in milliseconds."""

    def __init__(self):
        self.samples: list[float] = []

    def add(self, value_ms: float) -> None:
        self.samples.append(value_ms)

    def percentile(self, q: float) -> float:
        if not self.samples:
            return 0.0
        ordered = sorted(self.samples)
        index = max(0, min(len(ordered) - 1, round(q * (len(ordered) - 1))))
        return ordered[index]

    def summary(self) -> dict:
        if not self.samples:
            return {"count": 0, "p50_ms": 0.0, "p99_ms": 0.0, "max_ms": 0.0}
        return {
            "count": len(self.samples),
            "p50_ms": round(self.percentile(0.50), 3),
            "p99_ms": round(self.percentile(0.99), 3),
            "max_ms": round(max(self.samples), 3),
        }


class Session:
    def __init__(
        self,
        session_id: str,
        glossary: CompiledGlossary,
        automaton: TokenAutomaton,
        mode: MatchMode,
        cooldown_ms: int,
        log_path: Path | None,
        queue_bound: int = DEFAULT_QUEUE_BOUND,
    ):
        self.session_id = session_id
        self.glossary = glossary
        self.mode: MatchMode = mode
        self.cooldown_ms = cooldown_ms
        self.created_at = time.time()
        self.lock = threading.RLock()
        self.pipeline = SpotPipeline(
            automaton, mode=mode, cooldown_ms=cooldown_ms, session_id=session_id
        )
        self.subscribers: dict[str, Subscriber] = {}
        self.suppressed_by_client: dict[str, set[int]] = {}
        self.retained: list[CoreCue] = []
        self.queue_bound = queue_bound
        self.ingest_active = False
        self.events_seen = 0
        self.events_dropped = 0
        self.processing_stats = _Stats()
        self.emission_stats = _Stats()
        self._cue_seq = 0
        self._match_cue_ids: dict[tuple[int, int, int, int], int] = {}
        self._log: IO[str] | None = None
        if log_path is not None:
            self._log = open(log_path, "a", encoding="utf-8")

    def next_cue_id(self) -> int:
        self._cue_seq += 1
        return self._cue_seq

    @property
    def cue_count(self) -> int:
        return self._cue_seq

    def log_cue(self, cue: CoreCue) -> None:
        if self._log is not None:
            self._log.write(format_cue_line(cue.record()) + "\n")
            self._log.flush()

    def close(self) -> None:
        with self.lock:
            if self._log is not None:
                self._log.flush()
                self._log.close()
                self._log = None


def render_cue(glossary: CompiledGlossary, cue: CoreCue, language: str) -> dict:
    """Wire message for one cue in one subscriber's language."""
    result = glossary.lookup(cue.term_id, language)
    return {
        "type": "cue",
        "cue_id": cue.cue_id,
        "term_id": cue.term_id,
        "canonical": cue.canonical,
        "utterance_id": cue.utterance_id,
        "first_token": cue.first_token,
        "last_token": cue.last_token,
        "start_ms": cue.start_ms,
        "end_ms": cue.end_ms,
        "exact": cue.exact,
        "lang_used": result.language_used,
        "fallback": result.fallback,
        "explanation": result.explanation,
    }


class LectureEngine:
    """Owns glossaries and sessions; every public method is thread-safe."""

    def __init__(
        self,
        log_dir: Path | str | None = None,
        queue_bound: int = DEFAULT_QUEUE_BOUND,
    ):
        self._glossaries: dict[str, CompiledGlossary] = {}
        self._automata: dict[str, TokenAutomaton] = {}
        self._sessions: dict[str, Session] = {}
        self._default_version: str | None = None
        self._lock = threading.Lock()
        self._log_dir = Path(log_dir) if log_dir is not None else None
        self._queue_bound = queue_bound
        if self._log_dir is not None:
            self._log_dir.mkdir(parents=True, exist_ok=True)

    # -- glossary registry --

    def add_glossary(self, compiled: CompiledGlossary, default: bool = False) -> str:
        with self._lock:
            version = compiled.version
            if version not in self._glossaries:
                self._glossaries[version] = compiled
                self._automata[version] = build_automaton(compiled.patterns)
            if default or self._default_version is None:
                self._default_version = version
            return version

    def glossary(self, version: str) -> CompiledGlossary:
        try:
            return self._glossaries[version]
        except KeyError:
            raise UnknownGlossary(f"no glossary with version {version!r}") from None

    @property
    def glossary_versions(self) -> list[str]:
        return sorted(self._glossaries)

    # -- session lifecycle --

    def create_session(
        self,
        glossary: str | None = None,
        mode: MatchMode = "finals_only",
        cooldown_ms: int = DEFAULT_COOLDOWN_MS,
    ) -> str:
        if mode not in ("finals_only", "eager"):
            raise InvalidConfig(f"unknown mode {mode!r}")
        if not isinstance(cooldown_ms, int) or cooldown_ms < 0:
            raise InvalidConfig("cooldown_ms must be a non-negative integer")
        with self._lock:
            version = glossary or self._default_version
            if version is None or version not in self._glossaries:
                raise UnknownGlossary(f"no glossary with version {version!r}")
            session_id = uuid.uuid4().hex[:12]
            log_path = (
                self._log_dir / f"{session_id}.cues" if self._log_dir is not None else None
            )
            self._sessions[session_id] = Session(
                session_id=session_id,
                glossary=self._glossaries[version],
                automaton=self._automata[version],
                mode=mode,
                cooldown_ms=cooldown_ms,
                log_path=log_path,
                queue_bound=self._queue_bound,
            )
            return session_id

    def session(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSession(f"no session {session_id!r}") from None

    def session_status(self, session_id: str) -> dict:
        session = self.session(session_id)
        with session.lock:
            return {
                "session_id": session.session_id,
                "glossary_version": session.glossary.version,
                "mode": session.mode,
                "cooldown_ms": session.cooldown_ms,
                "cue_count": session.cue_count,
                "subscriber_count": len(session.subscribers),
                "events_seen": session.events_seen,
                "events_dropped": session.events_dropped,
                "ingest_active": session.ingest_active,
                "processing": session.processing_stats.summary(),
                "emission": session.emission_stats.summary(),
            }

    def close_session(self, session_id: str) -> None:
        session = self.session(session_id)
        session.close()

    def close(self) -> None:
        for session in list(self._sessions.values()):
            session.close()

    # -- ingest --

    def acquire_ingest(self, session_id: str) -> None:
        session = self.session(session_id)
        with session.lock:
            if session.ingest_active:
                raise SecondIngestRejected(
                    f"session {session_id} already has an active ingest stream"
                )
            session.ingest_active = True

    def release_ingest(self, session_id: str) -> None:
        session = self.session(session_id)
        with session.lock:
            session.ingest_active = False

    def ingest_line(self, session_id: str, line: str) -> IngestAck:
        try:
            event = parse_transcript_line(line)
        except MalformedLine as exc:
            session = self.session(session_id)
            with session.lock:
                session.events_dropped += 1
            return IngestAck(
                utterance_id=None,
                revision=None,
                accepted=False,
                cues=0,
                error="MalformedLine",
                detail=str(exc),
            )
        return self.ingest_event(session_id, event)

    def ingest_event(self, session_id: str, event: TranscriptEvent) -> IngestAck:
        session = self.session(session_id)
        started = time.perf_counter()
        with session.lock:
            session.events_seen += 1
            try:
                result = session.pipeline.push(event)
            except SequenceError as exc:
                session.events_dropped += 1
                session.processing_stats.add((time.perf_counter() - started) * 1000.0)
                return IngestAck(
                    utterance_id=event.utterance_id,
                    revision=event.revision,
                    accepted=False,
                    cues=0,
                    error=type(exc).__name__,
                    detail=str(exc),
                )
            processing_ms = (time.perf_counter() - started) * 1000.0

            for retraction in result.retractions:
                key = (
                    retraction.term_id,
                    retraction.utterance_id,
                    *retraction.token_range,
                )
                cue_id = session._match_cue_ids.pop(key, None)
                if cue_id is not None:
                    message = {
                        "type": "retract",
                        "cue_id": cue_id,
                        "term_id": retraction.term_id,
                        "utterance_id": retraction.utterance_id,
                    }
                    for subscriber in session.subscribers.values():
                        if retraction.term_id not in subscriber.suppressed:
                            subscriber.queue.push(message)

            tokens = result.update.tokens
            for record in result.cues:
                cue = CoreCue(
                    cue_id=session.next_cue_id(),
                    term_id=record.term_id,
                    canonical=record.canonical,
                    utterance_id=record.utterance_id,
                    first_token=record.first_token,
                    last_token=record.last_token,
                    start_ms=record.emit_ms,
                    end_ms=tokens[record.last_token].end_ms,
                    exact=record.exact,
                )
                session.retained.append(cue)
                session.log_cue(cue)
                session._match_cue_ids[
                    (cue.term_id, cue.utterance_id, cue.first_token, cue.last_token)
                ] = cue.cue_id
                for subscriber in session.subscribers.values():
                    if cue.term_id not in subscriber.suppressed:
                        subscriber.queue.push(
                            render_cue(session.glossary, cue, subscriber.language)
                        )

            session.processing_stats.add(processing_ms)
            if result.cues:
                session.emission_stats.add((time.perf_counter() - started) * 1000.0)
            return IngestAck(
                utterance_id=event.utterance_id,
                revision=event.revision,
                accepted=True,
                cues=len(result.cues),
            )

    # -- subscribers --

    def subscribe(
        self,
        session_id: str,
        language: str,
        resume_from: int | None = None,
        client_id: str | None = None,
    ) -> Subscriber:
        if not valid_language_tag(language):
            raise InvalidLanguage(f"invalid language tag {language!r}")
        session = self.session(session_id)
        with session.lock:
            cid = client_id or uuid.uuid4().hex[:12]
            suppressed = session.suppressed_by_client.setdefault(cid, set())
            subscriber = Subscriber(
                client_id=cid,
                language=language,
                joined_ms=int((time.time() - session.created_at) * 1000),
                suppressed=suppressed,
                queue=SubscriberQueue(session.queue_bound),
            )
            subscriber.queue.push(
                {
                    "type": "welcome",
                    "client_id": cid,
                    "session_id": session_id,
                    "glossary_version": session.glossary.version,
                    "cue_count": session.cue_count,
                }
            )
            if resume_from is not None:
                for cue in session.retained:
                    if cue.cue_id > resume_from and cue.term_id not in suppressed:
                        subscriber.queue.push(
                            render_cue(session.glossary, cue, language)
                        )
            session.subscribers[cid] = subscriber
            return subscriber

    def unsubscribe(self, session_id: str, client_id: str) -> None:
        session = self.session(session_id)
        with session.lock:
            removed = session.subscribers.pop(client_id, None)
            if removed is not None:
                removed.queue.set_notifier(None)
            # suppression stays for the remainder of the session

    def suppress_term(self, session_id: str, client_id: str, term_id: int) -> dict:
        session = self.session(session_id)
        with session.lock:
            subscriber = session.subscribers.get(client_id)
            if subscriber is None:
                raise UnknownClient(f"client {client_id!r} is not subscribed")
            if not 0 <= term_id < len(session.glossary):
                raise UnknownTermId(f"term_id {term_id} not in session glossary")
            subscriber.suppressed.add(term_id)  # idempotent
            ack = {"type": "suppress_ack", "term_id": term_id}
            subscriber.queue.push(ack)
            return ack


def replay_events(
    engine: LectureEngine,
    session_id: str,
    events: Iterable[TranscriptEvent],
    speed: float = 0.0,
) -> list[IngestAck]:
    """Drive a session from an event sequence, optionally paced.

    speed 0 replays as fast as possible; speed 1 sleeps to match event
    start times (2 = twice real time, and so on).
    """
    if speed < 0:
        raise ValueError("speed must be >= 0")
    acks = []
    wall_start = time.monotonic()
    for event in events:
        if speed > 0:
            target = wall_start + (event.start_ms / 1000.0) / speed
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        acks.append(engine.ingest_event(session_id, event))
    return acks
