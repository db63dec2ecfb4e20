"""Streaming detection of glossary terms in the normalized token stream.

The automaton is a token-level Aho-Corasick machine (goto trie, failure
links, output links) that finds every exact occurrence of every pattern in
a single pass. Fuzzy occurrences — at most one token per occurrence may
deviate, only for pattern tokens of length >= 6, and only by Levenshtein
distance 1 — are found by a parallel trie walk that tracks candidate
alignments per start position with a one-token fuzz budget. Candidate
occurrences are then filtered to the emitted match set by leftmost-longest
selection with exact-over-fuzzy priority.

Fuzzy edges are indexed SymSpell-style: every fuzzy-eligible edge label is
stored under itself and its single-character deletions, so the candidates
for an observed token are found by hashing its own deletion variants
instead of scanning all outgoing edges. The deletion index overapproximates
distance 1, so candidates are verified with an exact one-edit check.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Literal, Sequence

from .ingest import Sequencer, TranscriptEvent, UtteranceUpdate, fold_token

FUZZY_MIN_TOKEN_LEN = 6
DEFAULT_COOLDOWN_MS = 120_000

MatchMode = Literal["finals_only", "eager"]


class DuplicatePattern(ValueError):
    """Two distinct term_ids share an identical token sequence."""


@dataclass(frozen=True)
class TermPattern:
    """One matchable surface form (canonical term or alias) of a glossary term."""

    term_id: int
    canonical: str
    token_seq: tuple[str, ...]

    def __post_init__(self):
        if not self.token_seq:
            raise ValueError("token_seq must be non-empty")
        for tok in self.token_seq:
            if not tok or tok != fold_token(tok):
                raise ValueError(f"token {tok!r} is not a normalized token")

    @property
    def fuzzy_eligible(self) -> tuple[bool, ...]:
        return tuple(len(tok) >= FUZZY_MIN_TOKEN_LEN for tok in self.token_seq)


@dataclass(frozen=True)
class Match:
    term_id: int
    utterance_id: int
    token_range: tuple[int, int]
    start_ms: int
    end_ms: int
    exact: bool


@dataclass(frozen=True)
class Retraction:
    """A previously emitted eager match no longer holds after a revision."""

    term_id: int
    utterance_id: int
    token_range: tuple[int, int]


def within_one_edit(a: str, b: str) -> bool:
    """True iff Levenshtein distance between a and b is <= 1."""
    if a == b:
        return True
    la, lb = len(a), len(b)
    if la > lb:
        a, b, la, lb = b, a, lb, la
    if lb - la > 1:
        return False
    i = 0
    while i < la and a[i] == b[i]:
        i += 1
    if la == lb:
        # one substitution: suffixes after the mismatch must agree
        return a[i + 1 :] == b[i + 1 :]
    # one insertion in b: skip the extra character
    return a[i:] == b[i + 1 :]


def fuzzy_match_token(pattern_token: str, observed_token: str) -> bool:
    """Token-level match rule: equality, or one edit for long pattern tokens."""
    if pattern_token == observed_token:
        return True
    if len(pattern_token) < FUZZY_MIN_TOKEN_LEN:
        return False
    return within_one_edit(pattern_token, observed_token)


def _deletion_variants(token: str) -> set[str]:
    variants = {token}
    for i in range(len(token)):
        variants.add(token[: i] + token[i + 1 :])
    return variants


class _Node:
    __slots__ = ("children", "fail", "out", "pattern", "fuzzy_index", "fuzzy_below")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.fail: _Node = self
        self.out: tuple[TermPattern, ...] = ()
        self.pattern: TermPattern | None = None
        self.fuzzy_index: dict[str, list[tuple[str, _Node]]] = {}
        self.fuzzy_below = False


@dataclass(frozen=True)
class Candidate:
    """A raw pattern occurrence before leftmost-longest selection."""

    start: int
    end: int
    term_id: int
    exact: bool


class TokenAutomaton:
    """Immutable multi-pattern matcher over the token alphabet.

    Build once with build_automaton(); shareable across sessions and
    threads. Scanning state lives in TokenScanner instances.
    """

    def __init__(self, patterns: Iterable[TermPattern]):
        self._root = _Node()
        self._canonical: dict[int, str] = {}
        count = 0
        for pat in patterns:
            self._insert(pat)
            count += 1
        if count == 0:
            raise ValueError("automaton requires at least one pattern")
        self._build_links()
        self._build_fuzzy_indexes()

    @property
    def canonical_names(self) -> dict[int, str]:
        return dict(self._canonical)

    def _insert(self, pattern: TermPattern) -> None:
        node = self._root
        for tok in pattern.token_seq:
            node = node.children.setdefault(tok, _Node())
        if node.pattern is not None:
            if node.pattern.term_id != pattern.term_id:
                raise DuplicatePattern(
                    f"terms {node.pattern.term_id} and {pattern.term_id} share"
                    f" token sequence {' '.join(pattern.token_seq)!r}"
                )
            return  # same term spelled twice (alias == canonical); keep one
        node.pattern = pattern
        self._canonical.setdefault(pattern.term_id, pattern.canonical)

    def _build_links(self) -> None:
        root = self._root
        queue: deque[_Node] = deque()
        for child in root.children.values():
            child.fail = root
            child.out = (child.pattern,) if child.pattern else ()
            queue.append(child)
        while queue:
            current = queue.popleft()
            for tok, child in current.children.items():
                fallback = current.fail
                while fallback is not root and tok not in fallback.children:
                    fallback = fallback.fail
                child.fail = fallback.children.get(tok, root)
                own = (child.pattern,) if child.pattern else ()
                child.out = own + child.fail.out
                queue.append(child)

    def _build_fuzzy_indexes(self) -> None:
        # Post-order flag: a trie path can still spend its fuzz budget iff
        # some edge at or below it is fuzzy-eligible.
        def visit(node: _Node) -> bool:
            below = False
            for tok, child in node.children.items():
                child_flag = visit(child)
                eligible = len(tok) >= FUZZY_MIN_TOKEN_LEN
                if eligible:
                    for variant in _deletion_variants(tok):
                        node.fuzzy_index.setdefault(variant, []).append((tok, child))
                below = below or eligible or child_flag
            node.fuzzy_below = below
            return below

        visit(self._root)

    def _fuzzy_children(self, node: _Node, token: str) -> list[_Node]:
        if not node.fuzzy_index:
            return []
        seen: set[int] = set()
        result: list[_Node] = []
        for variant in _deletion_variants(token):
            for label, child in node.fuzzy_index.get(variant, ()):
                if label != token and id(child) not in seen and within_one_edit(label, token):
                    seen.add(id(child))
                    result.append(child)
        return result

    def scanner(self) -> "TokenScanner":
        return TokenScanner(self)

    def scan(self, tokens: Sequence[str]) -> list[Candidate]:
        """All pattern occurrences (exact and fuzzy) in one token sequence."""
        scanner = self.scanner()
        out: list[Candidate] = []
        for tok in tokens:
            out.extend(scanner.feed(tok))
        return out


class TokenScanner:
    """Incremental scan state for one token sequence (one utterance)."""

    def __init__(self, automaton: TokenAutomaton):
        self._automaton = automaton
        self._root = automaton._root
        self._state = self._root
        # (node, start_index) alignments that already spent their fuzz budget
        self._fuzzy_done: list[tuple[_Node, int]] = []
        # exact-so-far alignments that may still spend it
        self._fuzzy_open: list[tuple[_Node, int]] = []
        self._pos = -1
        self._seen: set[tuple[int, int, int]] = set()

    def feed(self, token: str) -> list[Candidate]:
        """Advance by one token; returns candidates ending at this position."""
        self._pos += 1
        pos = self._pos
        root = self._root
        found: list[Candidate] = []

        def report(start: int, term_id: int, exact: bool) -> None:
            # A span+term pair is exact xor fuzzy (a fuzzy alignment always
            # differs in one token), so plain dedup is enough.
            key = (start, pos, term_id)
            if key in self._seen:
                return
            self._seen.add(key)
            found.append(Candidate(start=start, end=pos, term_id=term_id, exact=exact))

        # Exact path: deterministic Aho-Corasick step.
        state = self._state
        while state is not root and token not in state.children:
            state = state.fail
        state = state.children.get(token, root)
        self._state = state
        for pat in state.out:
            report(pos - len(pat.token_seq) + 1, pat.term_id, True)

        # Fuzzy overlay: advance open and spent alignments.
        next_done: list[tuple[_Node, int]] = []
        next_open: list[tuple[_Node, int]] = []

        for node, start in self._fuzzy_done:
            child = node.children.get(token)
            if child is not None:
                next_done.append((child, start))
                if child.pattern is not None:
                    report(start, child.pattern.term_id, False)

        for node, start in list(self._fuzzy_open) + [(root, pos)]:
            child = node.children.get(token)
            if child is not None and child.fuzzy_below:
                next_open.append((child, start))
            for fchild in self._automaton._fuzzy_children(node, token):
                next_done.append((fchild, start))
                if fchild.pattern is not None:
                    report(start, fchild.pattern.term_id, False)

        self._fuzzy_done = next_done
        self._fuzzy_open = next_open
        return found


def build_automaton(patterns: Iterable[TermPattern]) -> TokenAutomaton:
    """Compile patterns into an immutable automaton.

    Raises DuplicatePattern when two term_ids share one token sequence and
    ValueError when the pattern set is empty.
    """
    return TokenAutomaton(patterns)


def select_matches(candidates: Iterable[Candidate]) -> list[Candidate]:
    """Leftmost-longest, non-overlapping selection with exact-over-fuzzy ties.

    Among candidates starting at the same token the longest wins; among
    overlapping candidates the earlier start wins; exact beats fuzzy on an
    identical range; remaining ties break on term_id for determinism.
    """
    ordered = sorted(
        candidates, key=lambda c: (c.start, -c.end, not c.exact, c.term_id)
    )
    selected: list[Candidate] = []
    last_end = -1
    for cand in ordered:
        if cand.start > last_end:
            selected.append(cand)
            last_end = cand.end
    return selected


class StreamMatcher:
    """Per-session matcher state: turns UtteranceUpdates into Match events.

    finals_only (default) emits matches exactly once, from finalized
    utterances. eager also matches partial hypotheses and emits a
    Retraction when a revision removes a previously matched span.
    """

    def __init__(self, automaton: TokenAutomaton, mode: MatchMode = "finals_only"):
        if mode not in ("finals_only", "eager"):
            raise ValueError(f"unknown mode {mode!r}")
        self._automaton = automaton
        self.mode = mode
        self._emitted: dict[int, dict[tuple[int, int, int], Match]] = {}

    def _matches_for(self, update: UtteranceUpdate) -> dict[tuple[int, int, int], Match]:
        tokens = [t.normalized for t in update.tokens]
        selected = select_matches(self._automaton.scan(tokens))
        out: dict[tuple[int, int, int], Match] = {}
        for cand in selected:
            match = Match(
                term_id=cand.term_id,
                utterance_id=update.utterance_id,
                token_range=(cand.start, cand.end),
                start_ms=update.tokens[cand.start].start_ms,
                end_ms=update.tokens[cand.end].end_ms,
                exact=cand.exact,
            )
            out[(cand.term_id, cand.start, cand.end)] = match
        return out

    def feed(self, update: UtteranceUpdate) -> list[Match | Retraction]:
        if self.mode == "finals_only":
            if not update.finalized:
                return []
            return sorted(
                self._matches_for(update).values(),
                key=lambda m: (m.token_range, m.term_id),
            )

        current = self._matches_for(update)
        previous = self._emitted.get(update.utterance_id, {})
        events: list[Match | Retraction] = []
        for key in sorted(previous.keys() - current.keys()):
            gone = previous[key]
            events.append(
                Retraction(
                    term_id=gone.term_id,
                    utterance_id=gone.utterance_id,
                    token_range=gone.token_range,
                )
            )
        for key in sorted(current.keys() - previous.keys()):
            events.append(current[key])
        if update.finalized:
            self._emitted.pop(update.utterance_id, None)
        else:
            self._emitted[update.utterance_id] = current
        return events


class CooldownDecision(Enum):
    EMIT = "emit"
    SUPPRESSED = "suppressed"


class CooldownLedger:
    """Per-(session, term) dedup: one cue per term per cooldown window."""

    def __init__(self, cooldown_ms: int = DEFAULT_COOLDOWN_MS):
        if cooldown_ms < 0:
            raise ValueError("cooldown_ms must be non-negative")
        self.cooldown_ms = cooldown_ms
        self._last_emit: dict[tuple[str, int], int] = {}

    def apply_cooldown(self, session_id: str, term_id: int, now_ms: int) -> CooldownDecision:
        key = (session_id, term_id)
        last = self._last_emit.get(key)
        if last is not None and now_ms - last < self.cooldown_ms:
            return CooldownDecision.SUPPRESSED
        self._last_emit[key] = now_ms
        return CooldownDecision.EMIT


@dataclass(frozen=True)
class CueRecord:
    """One emitted cue, as persisted in the cue-log file."""

    emit_ms: int
    term_id: int
    canonical: str
    utterance_id: int
    first_token: int
    last_token: int
    exact: bool


def format_cue_line(rec: CueRecord) -> str:
    kind = "exact" if rec.exact else "fuzzy"
    return (
        f"{rec.emit_ms}\t{rec.term_id}\t{rec.canonical}\t{rec.utterance_id}"
        f"\t{rec.first_token}\t{rec.last_token}\t{kind}"
    )


def parse_cue_line(line: str) -> CueRecord:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 7 or fields[6] not in ("exact", "fuzzy"):
        raise ValueError(f"malformed cue-log line: {line!r}")
    return CueRecord(
        emit_ms=int(fields[0]),
        term_id=int(fields[1]),
        canonical=fields[2],
        utterance_id=int(fields[3]),
        first_token=int(fields[4]),
        last_token=int(fields[5]),
        exact=fields[6] == "exact",
    )


@dataclass
class PipelineResult:
    cues: list[CueRecord]
    retractions: list[Retraction]
    update: UtteranceUpdate


class SpotPipeline:
    """sequencer → matcher → cooldown for one session stream.

    push() raises SequenceError for dropped events (state unchanged);
    otherwise returns the cues that cleared the cooldown, in span order.
    Cue emit times are event times (the matched span's start), so replaying
    the same stream always produces a byte-identical cue log.
    """

    def __init__(
        self,
        automaton: TokenAutomaton,
        mode: MatchMode = "finals_only",
        cooldown_ms: int = DEFAULT_COOLDOWN_MS,
        session_id: str = "replay",
    ):
        self.session_id = session_id
        self._sequencer = Sequencer(session_id)
        self._matcher = StreamMatcher(automaton, mode)
        self._ledger = CooldownLedger(cooldown_ms)
        self._canonical = automaton.canonical_names

    def push(self, event: TranscriptEvent) -> PipelineResult:
        update = self._sequencer.push(event)
        cues: list[CueRecord] = []
        retractions: list[Retraction] = []
        for emission in self._matcher.feed(update):
            if isinstance(emission, Retraction):
                retractions.append(emission)
                continue
            decision = self._ledger.apply_cooldown(
                self.session_id, emission.term_id, emission.start_ms
            )
            if decision is CooldownDecision.EMIT:
                cues.append(
                    CueRecord(
                        emit_ms=emission.start_ms,
                        term_id=emission.term_id,
                        canonical=self._canonical[emission.term_id],
                        utterance_id=emission.utterance_id,
                        first_token=emission.token_range[0],
                        last_token=emission.token_range[1],
                        exact=emission.exact,
                    )
                )
        return PipelineResult(cues=cues, retractions=retractions, update=update)
