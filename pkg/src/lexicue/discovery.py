"""Offline candidate-term discovery for glossary curation.

Ranks transcript n-grams (n = 1..3) by how much more often they occur in
the transcript than a background corpus would predict:

    score = tf * ln(tf / bg)

where tf is the n-gram's relative frequency among same-size n-grams in the
transcript, and bg is the product of the per-token background frequencies
(unknown tokens floored at BACKGROUND_FLOOR). Candidates with a stopword
in the first or last position are excluded; interior stopwords are fine
("rate of change"). Runs offline only; the live path never scores text.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Mapping, Sequence

BACKGROUND_FLOOR = 1e-9
NGRAM_SIZES = (1, 2, 3)

STOPWORDS = frozenset(
    """
    a about above after again all also am an and any are as at back be because
    been before being below between both but by can could did do does doing down
    during each few for from further had has have having he her here hers him his
    how i if in into is it its itself just like me more most my no nor not now of
    off on once only or other our ours out over own same she should so some such
    than that the their theirs them then there these they this those through to
    too under until up us very was we were what when where which while who whom
    why will with would you your yours
    """.split()
)


class EmptyTranscript(ValueError):
    """Candidate discovery needs at least one transcript token."""


def load_background(path) -> dict[str, float]:
    """Parse a background-frequency table: token<TAB>relative_frequency lines."""
    table: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValueError(f"line {lineno}: expected token<TAB>frequency")
            try:
                freq = float(fields[1])
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric frequency") from None
            if freq < 0:
                raise ValueError(f"line {lineno}: negative frequency")
            table[fields[0]] = freq
    return table


def discover_candidates(
    tokens: Sequence[str],
    background: Mapping[str, float],
    top_k: int,
) -> list[tuple[str, float]]:
    """Top candidate technical terms, best first; ties break lexicographically."""
    if top_k < 0:
        raise ValueError("top_k must be non-negative")
    if not tokens:
        raise EmptyTranscript("transcript has no tokens")
    scored: list[tuple[str, float]] = []
    for n in NGRAM_SIZES:
        total = len(tokens) - n + 1
        if total <= 0:
            continue
        counts = Counter(tuple(tokens[i : i + n]) for i in range(total))
        for gram, count in counts.items():
            if gram[0] in STOPWORDS or gram[-1] in STOPWORDS:
                continue
            tf = count / total
            bg = 1.0
            for tok in gram:
                bg *= max(background.get(tok, 0.0), BACKGROUND_FLOOR)
            scored.append((" ".join(gram), tf * math.log(tf / bg)))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:top_k]
