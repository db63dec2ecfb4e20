"""Adapter boundary for external explanation generators.

Authoring glossary content is out of the live path: a generator sits
behind a one-method adapter and answers (term, languages) requests with a
language -> explanation map. The process adapter speaks line-delimited
JSON over a child process's stdin/stdout:

    request:  {"term": "backpropagation", "languages": ["hi", "sw"]}
    response: {"explanations": {"hi": "...", "sw": "..."}}

Replies are validated before anything is merged: missing languages are
reported, never fabricated.
"""

from __future__ import annotations

import json
import os
import selectors
import subprocess
import time
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .glossary import Diagnostic, GlossaryEntry, valid_language_tag


class AdapterUnavailable(RuntimeError):
    """The generator process cannot be reached (spawn failure or died)."""


class AdapterTimeout(RuntimeError):
    """The generator did not answer within the configured deadline."""


class MalformedAdapterReply(ValueError):
    """The generator answered with something other than the reply schema."""


class GeneratorAdapter(Protocol):
    def generate(self, term: str, languages: Sequence[str]) -> Mapping[str, str]: ...


class ScriptedAdapter:
    """In-process adapter answering from a canned term -> {lang: text} table."""

    def __init__(self, replies: Mapping[str, Mapping[str, str]]):
        self._replies = {term: dict(langs) for term, langs in replies.items()}

    def generate(self, term: str, languages: Sequence[str]) -> dict[str, str]:
        canned = self._replies.get(term, {})
        return {lang: canned[lang] for lang in languages if lang in canned}


class ProcessAdapter:
    """Line-delimited JSON adapter over a persistent child process."""

    def __init__(self, argv: Sequence[str], deadline_s: float = 5.0):
        self._argv = list(argv)
        self._deadline_s = deadline_s
        self._proc: subprocess.Popen | None = None

    def _ensure_running(self) -> subprocess.Popen:
        if self._proc is not None and self._proc.poll() is None:
            return self._proc
        try:
            self._proc = subprocess.Popen(
                self._argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise AdapterUnavailable(f"cannot start generator: {exc}") from None
        return self._proc

    def close(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def _read_reply_line(self, proc: subprocess.Popen) -> bytes:
        assert proc.stdout is not None
        fd = proc.stdout.fileno()
        deadline = time.monotonic() + self._deadline_s
        buf = bytearray()
        sel = selectors.DefaultSelector()
        sel.register(fd, selectors.EVENT_READ)
        try:
            while b"\n" not in buf:
                remaining = deadline - time.monotonic()
                if remaining <= 0 or not sel.select(remaining):
                    self.close()  # a late reply would desync the stream
                    raise AdapterTimeout(
                        f"no reply within {self._deadline_s:.1f}s from {self._argv[0]}"
                    )
                chunk = os.read(fd, 4096)
                if not chunk:
                    self.close()
                    raise AdapterUnavailable("generator process closed its output")
                buf.extend(chunk)
        finally:
            sel.close()
        return bytes(buf[: buf.index(b"\n")])

    def generate(self, term: str, languages: Sequence[str]) -> dict[str, str]:
        proc = self._ensure_running()
        request = json.dumps({"term": term, "languages": list(languages)}, ensure_ascii=False)
        try:
            assert proc.stdin is not None
            proc.stdin.write(request.encode("utf-8") + b"\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self.close()
            raise AdapterUnavailable(f"generator pipe broken: {exc}") from None
        raw = self._read_reply_line(proc)
        try:
            reply = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedAdapterReply(f"reply is not valid JSON: {exc}") from None
        explanations = reply.get("explanations") if isinstance(reply, dict) else None
        if not isinstance(explanations, dict) or any(
            not isinstance(k, str) or not isinstance(v, str) for k, v in explanations.items()
        ):
            raise MalformedAdapterReply("reply must carry an 'explanations' object")
        return explanations


@dataclass(frozen=True)
class GenerationResult:
    entry: GlossaryEntry  # partial: term plus the accepted explanations
    missing: tuple[str, ...]
    diagnostics: tuple[Diagnostic, ...]


def generate_explanations(
    adapter: GeneratorAdapter,
    term: str,
    languages: Sequence[str],
) -> GenerationResult:
    """Ask the adapter for explanations and keep only the valid ones.

    AdapterUnavailable/AdapterTimeout/MalformedAdapterReply propagate, so a
    failed call never yields a partial result.
    """
    if not languages:
        raise ValueError("languages must be non-empty")
    reply = adapter.generate(term, languages)
    accepted: dict[str, str] = {}
    missing: list[str] = []
    diagnostics: list[Diagnostic] = []
    for lang in languages:
        if lang not in reply:
            missing.append(lang)
            continue
        text = reply[lang]
        if not valid_language_tag(lang):
            diagnostics.append(Diagnostic("InvalidLanguageCode", f"bad language code {lang!r}"))
            missing.append(lang)
        elif not text:
            diagnostics.append(
                Diagnostic("EmptyExplanation", f"generator returned empty text for {lang!r}")
            )
            missing.append(lang)
        else:
            accepted[lang] = text
    for lang in reply:
        if lang not in set(languages):
            diagnostics.append(
                Diagnostic("UnrequestedLanguage", f"ignored unrequested language {lang!r}")
            )
    if missing:
        diagnostics.append(
            Diagnostic("MissingLanguages", "no explanation for: " + ", ".join(missing))
        )
    return GenerationResult(
        entry=GlossaryEntry(term=term, explanations=accepted),
        missing=tuple(missing),
        diagnostics=tuple(diagnostics),
    )


def _scripted_main(argv: Sequence[str]) -> int:
    """Serve canned replies over stdin/stdout (a scripted stand-in generator).

    Usage: python -m lexicue.generator replies.json
    where replies.json maps term -> {language: explanation}.
    """
    import sys

    if len(argv) != 1:
        print("usage: python -m lexicue.generator replies.json", file=sys.stderr)
        return 2
    with open(argv[0], encoding="utf-8") as fh:
        replies = json.load(fh)
    adapter = ScriptedAdapter(replies)
    for line in sys.stdin:
        if not line.strip():
            continue
        request = json.loads(line)
        explanations = adapter.generate(request["term"], request.get("languages", []))
        sys.stdout.write(
            json.dumps({"explanations": explanations}, ensure_ascii=False) + "\n"
        )
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    import sys

    raise SystemExit(_scripted_main(sys.argv[1:]))
