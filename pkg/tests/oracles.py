"""Independent brute-force reference implementations for the test suite.

Nothing here shares code with the package: matching slides every pattern
over the token sequence, selection scans positions left to right, and
discovery enumerates n-grams with its own arithmetic. These stay naive on
purpose — they are the ground truth the optimized paths are checked
against.
"""

from __future__ import annotations

import math

FUZZY_MIN_LEN = 6


def levenshtein(a: str, b: str) -> int:
    """Classic full-DP edit distance."""
    if a == b:
        return 0
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[len(b)]


def oracle_token_match(pattern_token: str, observed: str) -> bool:
    if pattern_token == observed:
        return True
    if len(pattern_token) < FUZZY_MIN_LEN:
        return False
    if abs(len(pattern_token) - len(observed)) > 1:
        return False  # distance is at least the length gap
    return levenshtein(pattern_token, observed) <= 1


def oracle_occurrences(
    patterns: dict[int, tuple[str, ...]],
    tokens: list[str],
) -> set[tuple[int, int, int, bool]]:
    """Every (start, end, term_id, exact) occurrence, one fuzzy token allowed."""
    found: set[tuple[int, int, int, bool]] = set()
    for term_id, seq in patterns.items():
        width = len(seq)
        for start in range(len(tokens) - width + 1):
            budget = 1
            ok = True
            exact = True
            for offset in range(width):
                observed = tokens[start + offset]
                if seq[offset] == observed:
                    continue
                if budget > 0 and oracle_token_match(seq[offset], observed):
                    budget -= 1
                    exact = False
                    continue
                ok = False
                break
            if ok:
                found.add((start, start + width - 1, term_id, exact))
    return found


def oracle_select(
    occurrences: set[tuple[int, int, int, bool]],
) -> list[tuple[int, int, int, bool]]:
    """Leftmost-longest filter by scanning positions left to right.

    At each position take the longest candidate starting there (exact
    first, then lowest term_id on full ties) and jump past it.
    """
    if not occurrences:
        return []
    by_start: dict[int, list[tuple[int, int, int, bool]]] = {}
    for occ in occurrences:
        by_start.setdefault(occ[0], []).append(occ)
    chosen: list[tuple[int, int, int, bool]] = []
    limit = max(end for _, end, _, _ in occurrences)
    pos = 0
    while pos <= limit:
        starting_here = by_start.get(pos, [])
        if not starting_here:
            pos += 1
            continue
        best = None
        for occ in starting_here:
            if best is None:
                best = occ
                continue
            if occ[1] > best[1]:
                best = occ
            elif occ[1] == best[1]:
                if (not best[3] and occ[3]) or (occ[3] == best[3] and occ[2] < best[2]):
                    best = occ
        chosen.append(best)
        pos = best[1] + 1
    return chosen


def oracle_discover(
    tokens: list[str],
    background: dict[str, float],
    top_k: int,
    stopwords: frozenset[str],
    floor: float = 1e-9,
) -> list[tuple[str, float]]:
    """Exhaustive n-gram enumeration with independent scoring arithmetic."""
    scores: dict[str, float] = {}
    for n in (1, 2, 3):
        grams: list[tuple[str, ...]] = []
        for i in range(len(tokens)):
            if i + n <= len(tokens):
                grams.append(tuple(tokens[i : i + n]))
        for gram in set(grams):
            if gram[0] in stopwords or gram[-1] in stopwords:
                continue
            tf = grams.count(gram) / len(grams)
            bg = 1.0
            for tok in gram:
                bg *= background[tok] if background.get(tok, 0.0) > floor else floor
            scores[" ".join(gram)] = tf * math.log(tf / bg)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_k]
