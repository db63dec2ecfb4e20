import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexicue.ingest import TranscriptEvent, normalize_text, sequence_events
from lexicue.spotter import (
    Candidate,
    CooldownDecision,
    CooldownLedger,
    CueRecord,
    DuplicatePattern,
    Match,
    Retraction,
    SpotPipeline,
    StreamMatcher,
    TermPattern,
    build_automaton,
    format_cue_line,
    fuzzy_match_token,
    parse_cue_line,
    select_matches,
)

from oracles import levenshtein, oracle_occurrences, oracle_select


def _patterns(*seqs: str) -> list[TermPattern]:
    return [
        TermPattern(term_id=i, canonical=seq, token_seq=tuple(seq.split(" ")))
        for i, seq in enumerate(seqs)
    ]


def _scan_ranges(automaton, text: str):
    tokens = [t.normalized for t in normalize_text(text)]
    return [
        (c.start, c.end, c.term_id, c.exact)
        for c in select_matches(automaton.scan(tokens))
    ]


# -- build_automaton --


def test_paper_example_terms():
    automaton = build_automaton(_patterns("neural network", "backpropagation"))
    found = _scan_ranges(automaton, "the neural network uses backpropagation")
    assert found == [(1, 2, 0, True), (4, 4, 1, True)]


def test_leftmost_longest_prefers_longer():
    automaton = build_automaton(_patterns("network", "neural network"))
    found = _scan_ranges(automaton, "neural network")
    assert found == [(0, 1, 1, True)]


def test_duplicate_pattern_rejected():
    patterns = [
        TermPattern(term_id=0, canonical="neural net", token_seq=("neural", "net")),
        TermPattern(term_id=1, canonical="Neural Net", token_seq=("neural", "net")),
    ]
    with pytest.raises(DuplicatePattern):
        build_automaton(patterns)


def test_same_term_duplicate_surfaces_are_fine():
    patterns = [
        TermPattern(term_id=0, canonical="backpropagation", token_seq=("backpropagation",)),
        TermPattern(term_id=0, canonical="backpropagation", token_seq=("backpropagation",)),
        TermPattern(term_id=0, canonical="backpropagation", token_seq=("back", "propagation")),
    ]
    automaton = build_automaton(patterns)
    assert _scan_ranges(automaton, "back propagation") == [(0, 1, 0, True)]


def test_empty_pattern_set_rejected():
    with pytest.raises(ValueError):
        build_automaton([])


def test_overlapping_and_nested_patterns():
    automaton = build_automaton(_patterns("a b", "b c", "a b c d"))
    # the 4-gram wins at position 0; "b c" inside it is suppressed
    assert _scan_ranges(automaton, "a b c d") == [(0, 3, 2, True)]
    assert _scan_ranges(automaton, "x b c a b") == [(1, 2, 1, True), (3, 4, 0, True)]


# -- fuzzy matching --


def test_fuzzy_single_edit_long_token():
    assert fuzzy_match_token("backpropagation", "backpropogation")


def test_fuzzy_equal_tokens():
    assert fuzzy_match_token("network", "network")


def test_fuzzy_short_tokens_barred():
    assert not fuzzy_match_token("net", "nat")


def test_fuzzy_budget_is_one_token_per_match():
    automaton = build_automaton(_patterns("gradient descent method"))
    # one typo: fuzzy match
    assert _scan_ranges(automaton, "gradiant descent method") == [(0, 2, 0, False)]
    # two typos: no match
    assert _scan_ranges(automaton, "gradiant descrnt method") == []


def test_exact_over_fuzzy_same_range():
    automaton = build_automaton(_patterns("handler", "handlers"))
    found = _scan_ranges(automaton, "handlers")
    assert found == [(0, 0, 1, True)]


@given(st.text("abcdef", min_size=0, max_size=8), st.text("abcdef", min_size=0, max_size=8))
def test_within_one_edit_matches_dp(a, b):
    from lexicue.spotter import within_one_edit

    assert within_one_edit(a, b) == (levenshtein(a, b) <= 1)


# -- randomized equivalence against the sliding-window oracle --


def _random_case(rng: random.Random, n_patterns: int, n_tokens: int):
    vocab_short = ["ab", "cd", "efg", "hij", "klm", "no"]
    vocab_long = ["polymer", "gradient", "entropy", "manifold", "tensorflow", "quantile"]
    vocab = vocab_short + vocab_long
    patterns = {}
    seen = set()
    while len(patterns) < n_patterns:
        seq = tuple(rng.choice(vocab) for _ in range(rng.randint(1, 3)))
        if seq in seen:
            continue
        seen.add(seq)
        patterns[len(patterns)] = seq
    tokens = []
    while len(tokens) < n_tokens:
        roll = rng.random()
        if roll < 0.5:
            tokens.append(rng.choice(vocab))
        elif roll < 0.8:
            tokens.extend(patterns[rng.randrange(len(patterns))])
        else:
            word = rng.choice(vocab_long)
            pos = rng.randrange(len(word))
            tokens.append(word[:pos] + rng.choice("xyz") + word[pos + 1 :])
    return patterns, tokens[:n_tokens]


def test_matches_equal_oracle_on_random_cases():
    rng = random.Random(20240817)
    for _ in range(60):
        patterns, tokens = _random_case(rng, rng.randint(1, 25), rng.randint(5, 300))
        automaton = build_automaton(
            [
                TermPattern(term_id=tid, canonical=" ".join(seq), token_seq=seq)
                for tid, seq in patterns.items()
            ]
        )
        got = {
            (c.start, c.end, c.term_id, c.exact)
            for c in select_matches(automaton.scan(tokens))
        }
        expected = set(oracle_select(oracle_occurrences(patterns, tokens)))
        assert got == expected


def test_unfiltered_candidates_equal_oracle_occurrences():
    rng = random.Random(99)
    for _ in range(30):
        patterns, tokens = _random_case(rng, rng.randint(1, 15), rng.randint(5, 200))
        automaton = build_automaton(
            [
                TermPattern(term_id=tid, canonical=" ".join(seq), token_seq=seq)
                for tid, seq in patterns.items()
            ]
        )
        got = {(c.start, c.end, c.term_id, c.exact) for c in automaton.scan(tokens)}
        assert got == oracle_occurrences(patterns, tokens)


# -- streaming feed --


def _evt(utt, rev, kind, text, start=0, end=2000):
    return TranscriptEvent(utt, rev, kind, start, end, text)


def _feed_all(matcher, events):
    out = []
    for update in sequence_events(events):
        out.extend(matcher.feed(update))
    return out


def test_finals_only_ignores_partials():
    automaton = build_automaton(_patterns("neural network"))
    matcher = StreamMatcher(automaton, "finals_only")
    emissions = _feed_all(
        matcher,
        [
            _evt(1, 0, "partial", "the neural net"),
            _evt(1, 1, "final", "the neural network"),
        ],
    )
    assert len(emissions) == 1
    match = emissions[0]
    assert isinstance(match, Match)
    assert match.token_range == (1, 2)
    assert match.exact


def test_eager_match_survives_downgrade_to_fuzzy():
    automaton = build_automaton(_patterns("neural network"))
    matcher = StreamMatcher(automaton, "eager")
    updates = list(
        sequence_events(
            [_evt(1, 0, "partial", "the neural network"), _evt(1, 1, "final", "the neural nitwork")]
        )
    )
    first = matcher.feed(updates[0])
    assert len(first) == 1 and isinstance(first[0], Match)
    # "nitwork" still matches "network" fuzzily at the same span: the span was
    # not removed, so nothing is retracted and nothing is re-emitted.
    assert matcher.feed(updates[1]) == []


def test_eager_retraction_when_span_disappears():
    automaton = build_automaton(_patterns("short net"))  # no fuzzy-eligible tokens
    matcher = StreamMatcher(automaton, "eager")
    updates = list(
        sequence_events(
            [_evt(1, 0, "partial", "a short net"), _evt(1, 1, "final", "a short nut")]
        )
    )
    assert len(matcher.feed(updates[0])) == 1
    second = matcher.feed(updates[1])
    assert len(second) == 1
    assert isinstance(second[0], Retraction)
    assert second[0].token_range == (1, 2)


def test_eager_does_not_reemit_on_final():
    automaton = build_automaton(_patterns("neural network"))
    matcher = StreamMatcher(automaton, "eager")
    updates = list(
        sequence_events(
            [_evt(1, 0, "partial", "the neural network"), _evt(1, 1, "final", "the neural network is")]
        )
    )
    assert len(matcher.feed(updates[0])) == 1
    assert matcher.feed(updates[1]) == []


def test_streaming_equals_offline_scan():
    rng = random.Random(4242)
    from lexicue.synth import synth_events, synth_glossary
    from lexicue.glossary import compile_glossary

    compiled = compile_glossary(synth_glossary(40, rng))
    automaton = build_automaton(compiled.patterns)
    events = synth_events(list(compiled.entries), 120, rng)

    matcher = StreamMatcher(automaton, "finals_only")
    streamed = set()
    for update in sequence_events(events):
        for match in matcher.feed(update):
            streamed.add((match.utterance_id, match.token_range, match.term_id, match.exact))

    offline = set()
    for update in sequence_events(events):
        if not update.finalized:
            continue
        tokens = [t.normalized for t in update.tokens]
        for cand in select_matches(automaton.scan(tokens)):
            offline.add((update.utterance_id, (cand.start, cand.end), cand.term_id, cand.exact))

    assert streamed == offline


def test_case_and_punctuation_invariance():
    automaton = build_automaton(_patterns("neural network", "backpropagation"))
    variants = [
        "the neural network uses backpropagation",
        "The NEURAL Network uses Backpropagation!",
        "the neural-network uses backpropagation...",
    ]
    results = [_scan_ranges(automaton, text) for text in variants]
    assert results[0] == results[1] == results[2]


# -- cooldown --


def test_cooldown_suppresses_within_window():
    ledger = CooldownLedger(cooldown_ms=60_000)
    assert ledger.apply_cooldown("s", 1, 0) is CooldownDecision.EMIT
    assert ledger.apply_cooldown("s", 1, 30_000) is CooldownDecision.SUPPRESSED


def test_cooldown_emits_after_window():
    ledger = CooldownLedger(cooldown_ms=60_000)
    assert ledger.apply_cooldown("s", 1, 0) is CooldownDecision.EMIT
    assert ledger.apply_cooldown("s", 1, 61_000) is CooldownDecision.EMIT


def test_cooldown_keyed_per_term_and_session():
    ledger = CooldownLedger(cooldown_ms=60_000)
    assert ledger.apply_cooldown("s", 1, 0) is CooldownDecision.EMIT
    assert ledger.apply_cooldown("s", 2, 0) is CooldownDecision.EMIT
    assert ledger.apply_cooldown("other", 1, 0) is CooldownDecision.EMIT


def test_cooldown_boundary_is_inclusive():
    ledger = CooldownLedger(cooldown_ms=60_000)
    assert ledger.apply_cooldown("s", 1, 0) is CooldownDecision.EMIT
    assert ledger.apply_cooldown("s", 1, 60_000) is CooldownDecision.EMIT


@given(st.lists(st.integers(0, 500_000), min_size=1, max_size=50), st.integers(1, 100_000))
def test_cooldown_spacing_property(times, cooldown_ms):
    ledger = CooldownLedger(cooldown_ms=cooldown_ms)
    emitted = [
        t
        for t in sorted(times)
        if ledger.apply_cooldown("s", 7, t) is CooldownDecision.EMIT
    ]
    for before, after in zip(emitted, emitted[1:]):
        assert after - before >= cooldown_ms


# -- cue log lines --


def test_cue_line_round_trip():
    rec = CueRecord(
        emit_ms=81230,
        term_id=3,
        canonical="backpropagation",
        utterance_id=12,
        first_token=4,
        last_token=4,
        exact=False,
    )
    line = format_cue_line(rec)
    assert parse_cue_line(line) == rec
    assert line.endswith("\tfuzzy")


def test_pipeline_determinism():
    rng = random.Random(11)
    from lexicue.synth import synth_events, synth_glossary
    from lexicue.glossary import compile_glossary

    compiled = compile_glossary(synth_glossary(25, rng))
    automaton = build_automaton(compiled.patterns)
    events = synth_events(list(compiled.entries), 80, rng)

    def run():
        pipeline = SpotPipeline(automaton, cooldown_ms=30_000)
        lines = []
        for event in events:
            lines.extend(format_cue_line(c) for c in pipeline.push(event).cues)
        return "\n".join(lines)

    assert run() == run()
