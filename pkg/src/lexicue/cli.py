"""Operator and developer entry point.

    lexicue glossary build    --glossary FILE [--out FILE]
    lexicue glossary validate --glossary FILE
    lexicue glossary lookup   --glossary FILE --term TERM --lang LANG
    lexicue spot     --glossary FILE --transcript FILE [--out FILE]
    lexicue discover --transcript FILE --background FILE [--top-k N]
    lexicue bench    [--sizes CSV] [--subscribers N] [--seed N] ...
    lexicue serve    --glossary FILE [--bind HOST:PORT] [--log-dir DIR]

Exit codes: 0 success, 1 validation/diagnostic failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
import time
from collections import Counter
from pathlib import Path

from .discovery import EmptyTranscript, discover_candidates, load_background
from .engine import LectureEngine, replay_events
from .glossary import (
    CompiledGlossary,
    FALLBACK_ENGLISH,
    FALLBACK_TERM_ONLY,
    InvalidGlossary,
    ParseError,
    UnknownTerm,
    compile_glossary,
    load_glossary,
    validate_entries,
    write_compiled,
)
from .ingest import MalformedLine, SequenceError, read_transcript_file, sequence_events
from .spotter import SpotPipeline, build_automaton, format_cue_line

_MODE_BY_FLAG = {"finals": "finals_only", "eager": "eager"}


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _load_compiled_glossary(path: str) -> CompiledGlossary:
    """Load, validate, and compile, raising ValueError with a readable report."""
    entries = load_glossary(path)
    diagnostics = validate_entries(entries)
    if diagnostics:
        raise InvalidGlossary(diagnostics)
    return compile_glossary(entries)


def cmd_glossary(args: argparse.Namespace) -> int:
    if args.action == "validate":
        try:
            entries = load_glossary(args.glossary)
        except (OSError, ParseError) as exc:
            return _fail(str(exc))
        diagnostics = validate_entries(entries)
        for diagnostic in diagnostics:
            print(diagnostic)
        if diagnostics:
            return 1
        print(f"ok: {len(entries)} entries")
        return 0

    try:
        compiled = _load_compiled_glossary(args.glossary)
    except (OSError, ParseError) as exc:
        return _fail(str(exc))
    except InvalidGlossary as exc:
        for diagnostic in exc.diagnostics:
            print(diagnostic, file=sys.stderr)
        return 1

    if args.action == "build":
        out = args.out or args.glossary + ".compiled.json"
        write_compiled(compiled, out)
        print(compiled.version)
        return 0

    # lookup
    try:
        term_id = compiled.find_term(args.term)
    except UnknownTerm as exc:
        return _fail(str(exc))
    result = compiled.lookup(term_id, args.lang)
    if result.fallback == FALLBACK_TERM_ONLY:
        print(result.canonical)
        print(f"note: no explanation in {args.lang!r} or 'en'", file=sys.stderr)
    else:
        print(result.explanation)
        if result.fallback == FALLBACK_ENGLISH:
            print(f"note: fell back from {args.lang!r} to 'en'", file=sys.stderr)
    return 0


def cmd_spot(args: argparse.Namespace) -> int:
    try:
        compiled = _load_compiled_glossary(args.glossary)
        automaton = build_automaton(compiled.patterns)
    except (OSError, ParseError, InvalidGlossary, ValueError) as exc:
        return _fail(str(exc))
    pipeline = SpotPipeline(
        automaton, mode=_MODE_BY_FLAG[args.mode], cooldown_ms=args.cooldown_ms
    )
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    report = sys.stdout if args.out else sys.stderr
    term_counts: Counter[str] = Counter()
    cue_count = 0
    dropped = 0
    max_event_ms = 0.0
    try:
        for event in read_transcript_file(args.transcript):
            started = time.perf_counter()
            try:
                result = pipeline.push(event)
            except SequenceError as exc:
                dropped += 1
                print(f"dropped event: {exc}", file=sys.stderr)
                continue
            finally:
                max_event_ms = max(max_event_ms, (time.perf_counter() - started) * 1000.0)
            for cue in result.cues:
                out.write(format_cue_line(cue) + "\n")
                term_counts[cue.canonical] += 1
                cue_count += 1
    except (OSError, MalformedLine) as exc:
        return _fail(str(exc))
    finally:
        if args.out:
            out.close()
    print(f"cues: {cue_count}", file=report)
    for canonical, count in sorted(term_counts.items()):
        print(f"  {canonical}: {count}", file=report)
    print(f"dropped events: {dropped}", file=report)
    print(f"max per-event processing: {max_event_ms:.3f} ms", file=report)
    return 0


def cmd_discover(args: argparse.Namespace) -> int:
    try:
        tokens: list[str] = []
        for update in sequence_events(read_transcript_file(args.transcript)):
            if update.finalized:
                tokens.extend(token.normalized for token in update.tokens)
        background = load_background(args.background)
        candidates = discover_candidates(tokens, background, args.top_k)
    except (OSError, MalformedLine, EmptyTranscript, ValueError) as exc:
        return _fail(str(exc))
    for phrase, score in candidates:
        print(f"{phrase}\t{score:.6f}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        return _fail(f"bad --sizes value {args.sizes!r}")
    from .synth import synth_events, synth_glossary

    print("size\tevents\tcues\tproc_p50_ms\tproc_p99_ms\temit_p50_ms\temit_p99_ms")
    for size in sizes:
        rng = random.Random(args.seed * 1_000_003 + size)
        try:
            compiled = compile_glossary(synth_glossary(size, rng))
            engine = LectureEngine()
            engine.add_glossary(compiled)
        except ValueError as exc:
            return _fail(f"size {size}: {exc}")
        session_id = engine.create_session(cooldown_ms=args.cooldown_ms)
        langs = ("en", "hi", "sw")
        for i in range(args.subscribers):
            engine.subscribe(session_id, langs[i % len(langs)])
        events = synth_events(list(compiled.entries), args.utterances, rng)
        replay_events(engine, session_id, events, speed=args.speed)
        status = engine.session_status(session_id)
        processing = status["processing"]
        emission = status["emission"]
        print(
            f"{size}\t{status['events_seen']}\t{status['cue_count']}"
            f"\t{processing['p50_ms']}\t{processing['p99_ms']}"
            f"\t{emission['p50_ms']}\t{emission['p99_ms']}"
        )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    try:
        compiled = _load_compiled_glossary(args.glossary)
        build_automaton(compiled.patterns)  # surface empty/duplicate patterns now
    except (OSError, ParseError, InvalidGlossary, ValueError) as exc:
        return _fail(str(exc))
    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        return _fail(f"bad --bind value {args.bind!r}, expected HOST:PORT")
    engine = LectureEngine(log_dir=Path(args.log_dir))
    engine.add_glossary(compiled, default=True)
    app = create_app(engine)
    print(f"serving glossary {compiled.version} on {host}:{port_text}", file=sys.stderr)
    try:
        uvicorn.run(app, host=host, port=int(port_text), log_level="warning")
    except SystemExit as exc:  # uvicorn signals bind failures this way
        return int(exc.code or 1)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexicue",
        description="Live lexical cues: glossary tooling, offline spotting, serving.",
    )
    env = os.environ
    sub = parser.add_subparsers(dest="command", required=True)

    p_gloss = sub.add_parser("glossary", help="glossary lifecycle tooling")
    p_gloss.add_argument("action", choices=("build", "validate", "lookup"))
    p_gloss.add_argument("--glossary", required=True, help="glossary JSONL path")
    p_gloss.add_argument("--out", help="compiled artifact path (build)")
    p_gloss.add_argument("--term", help="term surface to look up")
    p_gloss.add_argument("--lang", help="language for lookup")
    p_gloss.set_defaults(func=cmd_glossary)

    p_spot = sub.add_parser("spot", help="offline spotting over a replay file")
    p_spot.add_argument("--glossary", required=True)
    p_spot.add_argument("--transcript", required=True)
    p_spot.add_argument("--out", help="cue-log path (default stdout)")
    p_spot.add_argument("--mode", choices=tuple(_MODE_BY_FLAG), default="finals")
    p_spot.add_argument("--cooldown-ms", type=int, default=120_000)
    p_spot.add_argument("--speed", type=float, default=0.0, help="unused offline; kept for parity")
    p_spot.set_defaults(func=cmd_spot)

    p_disc = sub.add_parser("discover", help="rank candidate terms for curation")
    p_disc.add_argument("--transcript", required=True)
    p_disc.add_argument("--background", required=True)
    p_disc.add_argument("--top-k", type=int, default=20)
    p_disc.set_defaults(func=cmd_discover)

    p_bench = sub.add_parser("bench", help="latency benchmark on synthetic lectures")
    p_bench.add_argument("--sizes", default="100,1000", help="comma-separated glossary sizes")
    p_bench.add_argument("--utterances", type=int, default=300)
    p_bench.add_argument("--subscribers", type=int, default=50)
    p_bench.add_argument("--seed", type=int, default=7)
    p_bench.add_argument("--speed", type=float, default=0.0)
    p_bench.add_argument("--cooldown-ms", type=int, default=120_000)
    p_bench.set_defaults(func=cmd_bench)

    p_serve = sub.add_parser("serve", help="run the live session service")
    p_serve.add_argument("--glossary", default=env.get("LEXICUE_GLOSSARY"), required="LEXICUE_GLOSSARY" not in env)
    p_serve.add_argument("--bind", default=env.get("LEXICUE_BIND", "127.0.0.1:8765"))
    p_serve.add_argument("--mode", choices=tuple(_MODE_BY_FLAG), default=env.get("LEXICUE_MODE", "finals"))
    p_serve.add_argument("--cooldown-ms", type=int, default=int(env.get("LEXICUE_COOLDOWN_MS", 120_000)))
    p_serve.add_argument("--log-dir", default=env.get("LEXICUE_LOG_DIR", "cue-logs"))
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "glossary" and args.action == "lookup":
        if not args.term or not args.lang:
            parser.error("glossary lookup requires --term and --lang")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
