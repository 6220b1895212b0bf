"""Grapheme-to-phoneme conversion.

Two backends are available:

* ``LexiconRules`` looks words up in a pronunciation lexicon and falls back to
  longest-match letter-to-sound rules.  It is pure Python and hermetic.
* ``ExternalCommand`` hands whole lines to an external phonemizer process
  (espeak-ng by default) over its standard streams.

Either backend may be wrapped with an on-disk cache (see :class:`PhonemeCache`).

Lexicon and rule files are UTF-8 text, one ``key<TAB>phonemes`` entry per line,
with ``#`` comment lines.  A lexicon key may join several words with ``_``
(``for_the``) to give a pronunciation for the whole phrase; phrase entries win
over word-by-word lookup.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import os
import shlex
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .phonemes import PhonemeSyntaxError, canonical_form, parse, render, strip_punctuation

log = logging.getLogger(__name__)

PHRASE_JOINER = "_"
PHONEMIZER_ENV = "PHONEMT_PHONEMIZER"
CACHE_ENV = "PHONEMT_CACHE_DIR"


class G2pError(Exception):
    pass


class MalformedLineError(G2pError):
    def __init__(self, lineno: int, path: str | os.PathLike = ""):
        super().__init__(f"{path}:{lineno}: expected 'word<TAB>phonemes'")
        self.lineno = lineno


class InvalidPhonemesError(G2pError):
    def __init__(self, lineno: int, detail: str = "", path: str | os.PathLike = ""):
        super().__init__(f"{path}:{lineno}: invalid phoneme string: {detail}")
        self.lineno = lineno


class NoRuleAppliesError(G2pError):
    def __init__(self, char: str, word: str = ""):
        super().__init__(f"no lexicon entry or letter-to-sound rule covers {char!r} in {word!r}")
        self.char = char


class BackendUnavailableError(G2pError):
    pass


class TooManyErrors(G2pError):
    def __init__(self, errors: list[tuple[int, str]]):
        lines = ", ".join(str(n) for n, _ in errors[:10])
        super().__init__(f"aborting after {len(errors)} failed lines (lines {lines})")
        self.errors = errors


@dataclass
class Lexicon:
    language: str
    entries: dict[str, str] = field(default_factory=dict)
    # lowercase key -> spelling as written in the file, used for back-conversion
    surface: dict[str, str] = field(default_factory=dict)
    duplicates: int = 0

    def __post_init__(self):
        self.max_phrase = max((k.count(PHRASE_JOINER) + 1 for k in self.entries), default=1)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, word: str) -> str | None:
        return self.entries.get(word.lower())


def _read_table(path: str | os.PathLike, validate: bool) -> list[tuple[str, str, int]]:
    rows: list[tuple[str, str, int]] = []
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" not in line:
                raise MalformedLineError(lineno, path)
            key, value = line.split("\t", 1)
            if not key or any(ch.isspace() for ch in key):
                raise MalformedLineError(lineno, path)
            value = value.strip()
            if validate:
                try:
                    value = canonical_form(value)
                except PhonemeSyntaxError as exc:
                    raise InvalidPhonemesError(lineno, str(exc), path) from None
            rows.append((key, value, lineno))
    return rows


def load_lexicon(path: str | os.PathLike, language: str | None = None) -> Lexicon:
    """Load a tab-separated pronunciation lexicon.

    Keys are case-folded with ``str.lower``; the original spelling is kept in
    ``Lexicon.surface``.  Duplicate keys keep the last value and are counted in
    ``Lexicon.duplicates``.
    """
    rows = _read_table(path, validate=True)
    entries: dict[str, str] = {}
    surface: dict[str, str] = {}
    dupes = 0
    for key, value, _lineno in rows:
        low = key.lower()
        if low in entries:
            dupes += 1
        entries[low] = value
        surface[low] = key
    if dupes:
        log.warning("%s: %d duplicate lexicon keys (last entry wins)", path, dupes)
    return Lexicon(language or Path(path).stem, entries, surface, dupes)


@dataclass
class RuleTable:
    """Letter-to-sound rules applied by longest match, left to right."""

    rules: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.rules = {k.lower(): v for k, v in self.rules.items()}
        self.max_len = max((len(k) for k in self.rules), default=0)

    def __len__(self) -> int:
        return len(self.rules)


def load_rules(path: str | os.PathLike) -> RuleTable:
    # Rule outputs are fragments, so they are only validated once assembled.
    rows = _read_table(path, validate=False)
    return RuleTable({k: v for k, v, _ in rows})


def apply_rules(word: str, rules: RuleTable, strict: bool = True) -> str:
    out: list[str] = []
    low = word.lower()
    i = 0
    while i < len(low):
        for size in range(min(rules.max_len, len(low) - i), 0, -1):
            piece = low[i : i + size]
            if piece in rules.rules:
                out.append(rules.rules[piece])
                i += size
                break
        else:
            if strict:
                raise NoRuleAppliesError(word[i], word)
            out.append(low[i])
            i += 1
    return "".join(out)


def phonemize_word(
    word: str, lexicon: Lexicon | None = None, rules: RuleTable | None = None, strict: bool = True
) -> str:
    """Phonemize one whitespace-free word: lexicon first, then rules."""
    if not word or any(ch.isspace() for ch in word):
        raise ValueError(f"expected a single non-empty word, got {word!r}")
    if lexicon is not None:
        hit = lexicon.get(word)
        if hit is not None:
            return hit
    result = apply_rules(word, rules or RuleTable(), strict)
    if not result:
        return ""
    try:
        return canonical_form(result)
    except PhonemeSyntaxError as exc:
        if strict:
            raise InvalidPhonemesError(0, f"rules produced {result!r} for {word!r}: {exc}") from None
        return canonical_form_lenient(result)


def canonical_form_lenient(text: str) -> str:
    return render(parse(text, strict=False)[0])


class BackendKind(str, enum.Enum):
    LEXICON_RULES = "lexicon_rules"
    EXTERNAL_COMMAND = "external_command"


DEFAULT_ESPEAK = ("espeak-ng", "-q", "--ipa", "-v", "{language}")


@dataclass(frozen=True)
class G2pBackendSpec:
    """Configuration for one phonemization backend.

    ``command`` may contain ``{language}``, which is substituted at spawn time.
    With ``persistent=True`` one child per worker is kept alive and fed one
    line at a time; otherwise a fresh process is run per line (espeak-ng
    reads its standard input to EOF, so that is the default for it).
    """

    kind: BackendKind
    language: str
    lexicon_path: Path | None = None
    rules_path: Path | None = None
    command: tuple[str, ...] | None = None
    persistent: bool = False
    cache_dir: Path | None = None
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", BackendKind(self.kind))
        for name in ("lexicon_path", "rules_path", "cache_dir"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, Path(value))
        if self.command is not None:
            object.__setattr__(self, "command", tuple(self.command))
        if self.kind is BackendKind.LEXICON_RULES and self.lexicon_path is None:
            raise ValueError("lexicon_rules backend requires lexicon_path")
        if self.kind is BackendKind.EXTERNAL_COMMAND and not self.command:
            raise ValueError("external_command backend requires command")

    @classmethod
    def espeak(cls, language: str, **kwargs) -> "G2pBackendSpec":
        env = os.environ.get(PHONEMIZER_ENV)
        command = tuple(shlex.split(env)) if env else DEFAULT_ESPEAK
        return cls(BackendKind.EXTERNAL_COMMAND, language, command=command, **kwargs)

    def resolved_command(self) -> list[str]:
        return [part.replace("{language}", self.language) for part in self.command or ()]


def _file_digest(path: Path | None) -> str:
    if path is None:
        return "-"
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _command_version(command: list[str]) -> str:
    try:
        proc = subprocess.run(
            [command[0], "--version"], capture_output=True, text=True, timeout=10, check=False
        )
    except (OSError, subprocess.TimeoutExpired):
        return "unavailable"
    text = (proc.stdout or proc.stderr).strip()
    return text.splitlines()[0] if text else "unknown"


def backend_fingerprint(spec: G2pBackendSpec) -> tuple[str, dict[str, str]]:
    """Hash identifying every input that can change the backend's output."""
    meta = {"kind": spec.kind.value, "language": spec.language, "strict": str(spec.strict)}
    if spec.kind is BackendKind.LEXICON_RULES:
        meta["lexicon_sha256"] = _file_digest(spec.lexicon_path)
        meta["rules_sha256"] = _file_digest(spec.rules_path)
    else:
        cmd = spec.resolved_command()
        meta["command"] = shlex.join(cmd)
        meta["version"] = _command_version(cmd)
    blob = "\n".join(f"{k}={v}" for k, v in sorted(meta.items()))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest(), meta


class PhonemeCache:
    """Append-only cache of phonemized lines.

    Layout under ``cache_dir``::

        <language>-<fingerprint[:16]>.tsv    records: language, sha256(line), phonemes
        <language>-<fingerprint[:16]>.meta   key=value description of the backend

    The fingerprint covers lexicon/rule contents or the external command and
    its reported version, so a changed backend never reads stale records.
    Reads are lock-free against the in-memory index; appends are serialized.
    """

    def __init__(self, cache_dir: str | os.PathLike, language: str, fingerprint: str, meta: Mapping[str, str]):
        self.dir = Path(cache_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.language = language
        stem = f"{language}-{fingerprint[:16]}"
        self.path = self.dir / f"{stem}.tsv"
        meta_path = self.dir / f"{stem}.meta"
        if not meta_path.exists():
            meta_path.write_text(
                "".join(f"{k}={v}\n" for k, v in sorted({**meta, "fingerprint": fingerprint}.items())),
                encoding="utf-8",
            )
        self._index: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    parts = line.rstrip("\n").split("\t")
                    if len(parts) == 3 and parts[0] == language:
                        self._index[parts[1]] = parts[2]
                    # a torn final record from a crash is ignored

    @staticmethod
    def key(line: str) -> str:
        return hashlib.sha256(line.encode("utf-8")).hexdigest()

    def get(self, line: str) -> str | None:
        return self._index.get(self.key(line))

    def put(self, line: str, phonemes: str) -> None:
        k = self.key(line)
        with self._lock:
            if k in self._index:
                return
            self._index[k] = phonemes
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(f"{self.language}\t{k}\t{phonemes}\n")

    def __len__(self) -> int:
        return len(self._index)


class _ExternalProcess:
    def __init__(self, command: list[str], persistent: bool):
        self.command = command
        self.persistent = persistent
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _spawn(self) -> subprocess.Popen:
        try:
            return subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise BackendUnavailableError(f"cannot start {self.command[0]!r}: {exc}") from None

    def query(self, line: str) -> str:
        with self._lock:
            if not self.persistent:
                try:
                    proc = subprocess.run(
                        self.command, input=line + "\n", capture_output=True, text=True,
                        encoding="utf-8", check=False,
                    )
                except OSError as exc:
                    raise BackendUnavailableError(f"cannot start {self.command[0]!r}: {exc}") from None
                if proc.returncode != 0:
                    raise BackendUnavailableError(
                        f"{self.command[0]!r} exited with status {proc.returncode}"
                    )
                return " ".join(proc.stdout.split())
            if self._proc is None or self._proc.poll() is not None:
                self._proc = self._spawn()
            assert self._proc.stdin is not None and self._proc.stdout is not None
            try:
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
                reply = self._proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise BackendUnavailableError(f"{self.command[0]!r} died: {exc}") from None
            if not reply:
                raise BackendUnavailableError(f"{self.command[0]!r} closed its output")
            return " ".join(reply.split())

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
            self._proc = None


class Phonemizer:
    """Runtime state for one backend: loaded tables, child process, cache.

    One instance must not be shared between threads when the backend is an
    external command; :func:`phonemize_stream` creates one per worker.
    """

    def __init__(self, spec: G2pBackendSpec, cache: PhonemeCache | None = None):
        self.spec = spec
        self.lexicon: Lexicon | None = None
        self.rules: RuleTable | None = None
        self._proc: _ExternalProcess | None = None
        self.backend_calls = 0
        self.cache_hits = 0
        self.fingerprint, self.meta = backend_fingerprint(spec)
        if spec.kind is BackendKind.LEXICON_RULES:
            self.lexicon = load_lexicon(spec.lexicon_path, spec.language)
            self.rules = load_rules(spec.rules_path) if spec.rules_path else RuleTable()
        else:
            self._proc = _ExternalProcess(spec.resolved_command(), spec.persistent)
        cache_dir = spec.cache_dir or os.environ.get(CACHE_ENV)
        if cache is None and cache_dir:
            cache = PhonemeCache(cache_dir, spec.language, self.fingerprint, self.meta)
        self.cache = cache

    def _share(self) -> "Phonemizer":
        twin = object.__new__(Phonemizer)
        twin.__dict__.update(self.__dict__)
        twin.backend_calls = twin.cache_hits = 0
        if self._proc is not None:
            twin._proc = _ExternalProcess(self._proc.command, self._proc.persistent)
        return twin

    def _words(self, line: str) -> list[str]:
        assert self.lexicon is not None and self.rules is not None
        words = line.split()
        out: list[str] = []
        i = 0
        while i < len(words):
            for size in range(min(self.lexicon.max_phrase, len(words) - i), 1, -1):
                hit = self.lexicon.get(PHRASE_JOINER.join(words[i : i + size]))
                if hit is not None:
                    out.append(hit)
                    i += size
                    break
            else:
                out.append(phonemize_word(words[i], self.lexicon, self.rules, self.spec.strict))
                i += 1
        return [w for w in out if w]

    def phonemize_line(self, line: str) -> str:
        text = strip_punctuation(line)
        if not text:
            return ""
        if self.cache is not None:
            hit = self.cache.get(text)
            if hit is not None:
                self.cache_hits += 1
                return hit
        self.backend_calls += 1
        if self._proc is not None:
            raw = self._proc.query(text)
            raw = strip_punctuation(raw, phonemic=True)
            try:
                result = canonical_form(raw)
            except PhonemeSyntaxError as exc:
                if self.spec.strict:
                    raise InvalidPhonemesError(0, f"backend output {raw!r}: {exc}") from None
                result = canonical_form_lenient(raw)
        else:
            result = " ".join(self._words(text))
        if self.cache is not None:
            self.cache.put(text, result)
        return result

    def close(self) -> None:
        if self._proc is not None:
            self._proc.close()

    def __enter__(self) -> "Phonemizer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def phonemize_line(line: str, backend: G2pBackendSpec | Phonemizer) -> str:
    """Strip punctuation from ``line`` and phonemize it word by word or whole."""
    if isinstance(backend, Phonemizer):
        return backend.phonemize_line(line)
    with Phonemizer(backend) as ph:
        return ph.phonemize_line(line)


@dataclass
class StreamSummary:
    lines: int = 0
    cache_hits: int = 0
    backend_calls: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    def report(self) -> str:
        out = [
            f"lines={self.lines}",
            f"cache_hits={self.cache_hits}",
            f"backend_calls={self.backend_calls}",
            f"errors={len(self.errors)}",
        ]
        out += [f"error.{n}={msg}" for n, msg in self.errors]
        return "\n".join(out) + "\n"


def phonemize_stream(
    lines: Iterable[str],
    backend: G2pBackendSpec | Phonemizer,
    workers: int = 1,
    summary: StreamSummary | None = None,
    max_errors: int | None = None,
    chunk_size: int = 256,
) -> Iterator[str | None]:
    """Phonemize ``lines`` in order, yielding ``None`` for lines that failed.

    Failures are recorded in ``summary.errors`` as ``(line_number, message)``
    with 1-based line numbers.  :class:`TooManyErrors` is raised once more
    than ``max_errors`` lines have failed.  Backend availability problems are
    never swallowed.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    summary = summary if summary is not None else StreamSummary()
    owner = backend if isinstance(backend, Phonemizer) else Phonemizer(backend)
    pool = [owner] + [owner._share() for _ in range(workers - 1)]
    base_hits, base_calls = owner.cache_hits, owner.backend_calls
    local = threading.local()
    free = list(pool)
    free_lock = threading.Lock()

    def worker_instance() -> Phonemizer:
        inst = getattr(local, "inst", None)
        if inst is None:
            with free_lock:
                inst = local.inst = free.pop()
        return inst

    def run(item: tuple[int, str]) -> tuple[int, str | None, str | None]:
        lineno, text = item
        ph = worker_instance()
        try:
            return lineno, ph.phonemize_line(text), None
        except BackendUnavailableError:
            raise
        except (G2pError, PhonemeSyntaxError, ValueError) as exc:
            return lineno, None, str(exc)

    def chunks() -> Iterator[list[tuple[int, str]]]:
        buf: list[tuple[int, str]] = []
        for item in enumerate(lines, start=1):
            buf.append(item)
            if len(buf) >= chunk_size:
                yield buf
                buf = []
        if buf:
            yield buf

    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for chunk in chunks():
            results = executor.map(run, chunk) if executor else map(run, chunk)
            for lineno, out, err in results:
                summary.lines += 1
                if err is not None:
                    summary.errors.append((lineno, err))
                    if max_errors is not None and len(summary.errors) > max_errors:
                        raise TooManyErrors(summary.errors)
                yield out
    finally:
        if executor:
            executor.shutdown(wait=True)
        summary.cache_hits = sum(p.cache_hits for p in pool) - base_hits
        summary.backend_calls = sum(p.backend_calls for p in pool) - base_calls
        for p in pool[1:]:
            p.close()
        if not isinstance(backend, Phonemizer):
            owner.close()
