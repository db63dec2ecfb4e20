"""Seeded synthetic glossaries and lectures for benchmarks and replay tests.

Everything is driven by a caller-supplied random.Random, so the same seed
always yields the same glossary, the same utterances, and therefore the
same cues.
"""

from __future__ import annotations

import random

from .glossary import GlossaryEntry
from .ingest import TranscriptEvent

_SYLLABLES = (
    "ba", "cel", "dro", "fen", "gor", "hal", "jin", "kor", "lem", "mir",
    "nor", "pex", "qua", "rin", "sol", "tav", "ulm", "vor", "wex", "zan",
    "tri", "plex", "done", "stat", "form",
)

_FILLER = (
    "the", "a", "so", "now", "we", "see", "that", "this", "here", "look",
    "and", "then", "it", "is", "of", "to", "in", "very", "quite", "really",
    "example", "board", "next", "again", "right", "okay", "means", "say",
)


def _word(rng: random.Random) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 4)))


def _typo(word: str, rng: random.Random) -> str:
    """One random edit (substitute, delete, or insert one letter)."""
    pos = rng.randrange(len(word))
    op = rng.choice(("sub", "del", "ins"))
    letter = rng.choice("abcdefghijklmnopqrstuvwxyz")
    if op == "sub":
        if letter == word[pos]:
            letter = "q" if word[pos] != "q" else "z"
        return word[:pos] + letter + word[pos + 1 :]
    if op == "del":
        return word[:pos] + word[pos + 1 :]
    return word[:pos] + letter + word[pos:]


def synth_glossary(n_terms: int, rng: random.Random) -> list[GlossaryEntry]:
    """Unique synthetic terms (1..3 tokens) with en/hi/sw explanations."""
    surfaces: set[tuple[str, ...]] = set()
    entries: list[GlossaryEntry] = []
    while len(entries) < n_terms:
        n_tokens = rng.choices((1, 2, 3), weights=(5, 4, 1))[0]
        tokens = tuple(_word(rng) for _ in range(n_tokens))
        if tokens in surfaces:
            continue
        surfaces.add(tokens)
        term = " ".join(tokens)
        aliases: list[str] = []
        if n_tokens == 2 and rng.random() < 0.3:
            fused = ("".join(tokens),)
            if fused not in surfaces:
                surfaces.add(fused)
                aliases.append(fused[0])
        entries.append(
            GlossaryEntry(
                term=term,
                aliases=tuple(aliases),
                tags=("synthetic",),
                explanations={
                    "en": f"{term} is a synthetic lecture concept",
                    "hi": f"{term} ek banaavati paribhaasha hai",
                    "sw": f"{term} ni dhana ya kubuni ya mhadhara",
                },
            )
        )
    return entries


def synth_events(
    entries: list[GlossaryEntry],
    n_utterances: int,
    rng: random.Random,
    mention_rate: float = 0.3,
    typo_rate: float = 0.15,
    partial_rate: float = 0.3,
) -> list[TranscriptEvent]:
    """A lecture event stream that mentions glossary terms, with typos.

    Some utterances get a partial hypothesis first; all get exactly one
    final. Timing is monotonic with realistic speech pacing.
    """
    events: list[TranscriptEvent] = []
    clock_ms = 0
    for utterance_id in range(n_utterances):
        tokens: list[str] = [rng.choice(_FILLER)]
        target_len = rng.randint(6, 14)
        while len(tokens) < target_len:
            if entries and rng.random() < mention_rate:
                words = rng.choice(entries).term.split(" ")
                if rng.random() < typo_rate:
                    at = rng.randrange(len(words))
                    if len(words[at]) >= 6:
                        words = words[:at] + [_typo(words[at], rng)] + words[at + 1 :]
                tokens.extend(words)
            else:
                tokens.append(rng.choice(_FILLER))
        text = " ".join(tokens)
        duration_ms = int(len(text) * 55 * (0.8 + 0.4 * rng.random()))
        start_ms = clock_ms
        end_ms = start_ms + duration_ms
        if rng.random() < partial_rate and len(tokens) > 3:
            cut = rng.randint(2, len(tokens) - 1)
            partial_text = " ".join(tokens[:cut])
            partial_end = start_ms + int(duration_ms * cut / len(tokens))
            events.append(
                TranscriptEvent(utterance_id, 0, "partial", start_ms, partial_end, partial_text)
            )
            events.append(TranscriptEvent(utterance_id, 1, "final", start_ms, end_ms, text))
        else:
            events.append(TranscriptEvent(utterance_id, 0, "final", start_ms, end_ms, text))
        clock_ms = end_ms + rng.randint(120, 600)
    return events
