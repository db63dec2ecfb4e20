import random

import pytest

from lexicue.engine import (
    InvalidConfig,
    InvalidLanguage,
    LectureEngine,
    SecondIngestRejected,
    SubscriberQueue,
    UnknownClient,
    UnknownGlossary,
    UnknownSession,
    UnknownTermId,
    replay_events,
)
from lexicue.glossary import compile_glossary, load_glossary
from lexicue.ingest import TranscriptEvent
from lexicue.spotter import parse_cue_line


@pytest.fixture
def engine(table1_glossary_path):
    engine = LectureEngine()
    engine.add_glossary(compile_glossary(load_glossary(table1_glossary_path)))
    return engine


def _evt(utt, rev, kind, text, start=0, end=2000):
    return TranscriptEvent(utt, rev, kind, start, end, text)


def _cues(subscriber):
    return [m for m in subscriber.queue.pop_all() if m["type"] == "cue"]


# -- session lifecycle --


def test_create_session_unique_ids(engine):
    first = engine.create_session()
    second = engine.create_session()
    assert first != second
    assert engine.session_status(first)["cue_count"] == 0


def test_create_session_unknown_glossary(engine):
    with pytest.raises(UnknownGlossary):
        engine.create_session(glossary="doesnotexist")


def test_create_session_invalid_config(engine):
    with pytest.raises(InvalidConfig):
        engine.create_session(cooldown_ms=-1)
    with pytest.raises(InvalidConfig):
        engine.create_session(mode="both")


def test_unknown_session(engine):
    with pytest.raises(UnknownSession):
        engine.session_status("nope")


# -- ingest and fan-out --


def test_two_languages_get_their_own_explanations(engine):
    sid = engine.create_session()
    hindi = engine.subscribe(sid, "hi")
    swahili = engine.subscribe(sid, "sw")
    ack = engine.ingest_event(sid, _evt(1, 0, "final", "we now use backpropagation"))
    assert ack.accepted and ack.cues == 1
    hi_cues, sw_cues = _cues(hindi), _cues(swahili)
    assert len(hi_cues) == len(sw_cues) == 1
    assert hi_cues[0]["explanation"].startswith("ek algorithm")
    assert sw_cues[0]["explanation"].startswith("ni mbinu")
    shared = ("cue_id", "term_id", "utterance_id", "first_token", "last_token", "start_ms", "end_ms")
    for key in shared:
        assert hi_cues[0][key] == sw_cues[0][key]
    assert hi_cues[0]["lang_used"] == "hi"
    assert sw_cues[0]["lang_used"] == "sw"


def test_ingest_example_two_cues(engine):
    sid = engine.create_session()
    student = engine.subscribe(sid, "hi")
    ack = engine.ingest_event(
        sid, _evt(1, 0, "final", "the neural network uses backpropagation")
    )
    assert ack.cues == 2
    cues = _cues(student)
    assert [c["canonical"] for c in cues] == ["neural network", "backpropagation"]


def test_cooldown_suppresses_repeat(engine):
    sid = engine.create_session(cooldown_ms=60_000)
    engine.subscribe(sid, "hi")
    first = engine.ingest_event(
        sid, _evt(1, 0, "final", "the neural network", start=0, end=2000)
    )
    second = engine.ingest_event(
        sid, _evt(2, 0, "final", "the neural network", start=10_000, end=12_000)
    )
    assert first.cues == 1
    assert second.cues == 0


def test_sequence_drops_reported_in_acks(engine):
    sid = engine.create_session()
    assert engine.ingest_event(sid, _evt(1, 0, "final", "one")).accepted
    dropped = engine.ingest_event(sid, _evt(1, 1, "partial", "late"))
    assert not dropped.accepted
    assert dropped.error == "EventAfterFinal"
    malformed = engine.ingest_line(sid, "bad\tline")
    assert not malformed.accepted
    assert malformed.error == "MalformedLine"
    status = engine.session_status(sid)
    assert status["events_dropped"] == 2


def test_second_ingest_rejected(engine):
    sid = engine.create_session()
    engine.acquire_ingest(sid)
    with pytest.raises(SecondIngestRejected):
        engine.acquire_ingest(sid)
    engine.release_ingest(sid)
    engine.acquire_ingest(sid)  # free again


# -- suppression --


def test_suppression_blocks_term_for_one_client(engine):
    sid = engine.create_session(cooldown_ms=0)
    muted = engine.subscribe(sid, "hi")
    other = engine.subscribe(sid, "sw")
    term_id = engine.session(sid).glossary.find_term("backpropagation")
    engine.suppress_term(sid, muted.client_id, term_id)
    engine.ingest_event(sid, _evt(1, 0, "final", "backpropagation here"))
    muted_cues = [c for c in _cues(muted) if c["term_id"] == term_id]
    other_cues = [c for c in _cues(other) if c["term_id"] == term_id]
    assert muted_cues == []
    assert len(other_cues) == 1


def test_suppress_idempotent_and_acked(engine):
    sid = engine.create_session()
    student = engine.subscribe(sid, "hi")
    first = engine.suppress_term(sid, student.client_id, 0)
    second = engine.suppress_term(sid, student.client_id, 0)
    assert first == second == {"type": "suppress_ack", "term_id": 0}
    acks = [m for m in student.queue.pop_all() if m["type"] == "suppress_ack"]
    assert len(acks) == 2
    assert engine.session(sid).suppressed_by_client[student.client_id] == {0}


def test_suppress_unknown_term_and_client(engine):
    sid = engine.create_session()
    student = engine.subscribe(sid, "hi")
    with pytest.raises(UnknownTermId):
        engine.suppress_term(sid, student.client_id, 999)
    with pytest.raises(UnknownClient):
        engine.suppress_term(sid, "ghost", 0)


def test_suppression_survives_reconnect(engine):
    sid = engine.create_session(cooldown_ms=0)
    student = engine.subscribe(sid, "hi")
    term_id = engine.session(sid).glossary.find_term("backpropagation")
    engine.suppress_term(sid, student.client_id, term_id)
    engine.unsubscribe(sid, student.client_id)
    engine.ingest_event(sid, _evt(1, 0, "final", "backpropagation appears"))
    again = engine.subscribe(sid, "hi", resume_from=0, client_id=student.client_id)
    replayed = [c for c in _cues(again) if c["term_id"] == term_id]
    assert replayed == []


# -- ordering, resume, gaps --


def test_resume_from_replays_missed_cues(engine):
    sid = engine.create_session(cooldown_ms=0)
    for i in range(8):
        ack = engine.ingest_event(
            sid,
            _evt(i, 0, "final", "the neural network", start=i * 1000, end=i * 1000 + 900),
        )
        assert ack.cues == 1
    late = engine.subscribe(sid, "hi", resume_from=5)
    cues = _cues(late)
    assert [c["cue_id"] for c in cues] == [6, 7, 8]


def test_per_client_ordering_across_reconnect(engine):
    sid = engine.create_session(cooldown_ms=0)
    student = engine.subscribe(sid, "hi")
    for i in range(4):
        engine.ingest_event(sid, _evt(i, 0, "final", "gradient descent", start=i * 1000, end=i * 1000 + 500))
    seen = [c["cue_id"] for c in _cues(student)]
    engine.unsubscribe(sid, student.client_id)
    for i in range(4, 7):
        engine.ingest_event(sid, _evt(i, 0, "final", "gradient descent", start=i * 1000, end=i * 1000 + 500))
    back = engine.subscribe(sid, "hi", resume_from=seen[-1], client_id=student.client_id)
    seen += [c["cue_id"] for c in _cues(back)]
    assert seen == sorted(seen)
    assert len(set(seen)) == len(seen) == 7


def test_queue_overflow_drops_oldest_and_marks_gap():
    queue = SubscriberQueue(bound=3)
    for cue_id in range(1, 6):
        queue.push({"type": "cue", "cue_id": cue_id})
    messages = queue.pop_all()
    assert messages[0] == {"type": "gap", "next_cue_id": 3}
    assert [m["cue_id"] for m in messages[1:]] == [3, 4, 5]


def test_queue_control_messages_never_dropped():
    queue = SubscriberQueue(bound=2)
    queue.push({"type": "welcome", "client_id": "c"})
    for cue_id in range(1, 5):
        queue.push({"type": "cue", "cue_id": cue_id})
    kinds = [m["type"] for m in queue.pop_all()]
    assert kinds[0] == "welcome"
    assert "gap" in kinds


def test_slow_subscriber_does_not_block_others(engine):
    sid = engine.create_session(cooldown_ms=0)
    slow = engine.subscribe(sid, "hi")  # never drains
    fast = engine.subscribe(sid, "sw")
    for i in range(engine.session(sid).queue_bound + 50):
        engine.ingest_event(
            sid, _evt(i, 0, "final", "overfitting", start=i * 10, end=i * 10 + 5)
        )
        for message in fast.queue.pop_all():
            assert message["type"] in ("welcome", "cue")
    # the slow queue stayed bounded and flagged the gap
    slow_messages = slow.queue.pop_all()
    assert len([m for m in slow_messages if m["type"] == "cue"]) == engine.session(sid).queue_bound
    assert any(m["type"] == "gap" for m in slow_messages)


# -- cue log persistence --


def test_cue_log_written_and_parseable(tmp_path, table1_glossary_path):
    engine = LectureEngine(log_dir=tmp_path / "logs")
    engine.add_glossary(compile_glossary(load_glossary(table1_glossary_path)))
    sid = engine.create_session(cooldown_ms=0)
    engine.ingest_event(sid, _evt(1, 0, "final", "the neural network uses backpropagation"))
    engine.ingest_event(sid, _evt(2, 0, "final", "gradient descent", start=3000, end=4000))
    log_path = tmp_path / "logs" / f"{sid}.cues"
    lines = log_path.read_text(encoding="utf-8").splitlines()
    records = [parse_cue_line(line) for line in lines]
    assert [r.canonical for r in records] == ["neural network", "backpropagation", "gradient descent"]
    engine.close()
    assert log_path.read_text(encoding="utf-8").endswith("\n")  # no torn lines


def test_cue_log_is_prefix_of_delivered_stream(tmp_path, table1_glossary_path):
    engine = LectureEngine(log_dir=tmp_path)
    engine.add_glossary(compile_glossary(load_glossary(table1_glossary_path)))
    sid = engine.create_session(cooldown_ms=0)
    student = engine.subscribe(sid, "en")
    for i in range(5):
        engine.ingest_event(sid, _evt(i, 0, "final", "overfitting", start=i * 1000, end=i * 1000 + 500))
    delivered = [(c["term_id"], c["utterance_id"]) for c in _cues(student)]
    logged = [
        (r.term_id, r.utterance_id)
        for r in map(parse_cue_line, (tmp_path / f"{sid}.cues").read_text().splitlines())
    ]
    assert logged == delivered[: len(logged)]
    assert len(logged) == 5


# -- latency accounting --


def test_latency_stats_populated(engine):
    from lexicue.synth import synth_events, synth_glossary

    rng = random.Random(5)
    compiled = compile_glossary(synth_glossary(30, rng))
    engine.add_glossary(compiled)
    sid = engine.create_session(glossary=compiled.version)
    engine.subscribe(sid, "en")
    events = synth_events(list(compiled.entries), 50, rng)
    acks = replay_events(engine, sid, events, speed=0.0)
    assert all(a.accepted for a in acks)
    status = engine.session_status(sid)
    assert status["processing"]["count"] == len(events)
    assert status["cue_count"] > 0
    assert status["emission"]["count"] > 0
    assert status["processing"]["p99_ms"] >= 0.0


def test_invalid_language_rejected(engine):
    sid = engine.create_session()
    with pytest.raises(InvalidLanguage):
        engine.subscribe(sid, "zz-!!")
