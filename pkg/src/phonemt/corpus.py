"""Line-aligned parallel corpora and their phonemized twins."""

from __future__ import annotations

import enum
import math
import os
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .g2p import G2pBackendSpec, Phonemizer, StreamSummary, phonemize_stream
from .phonemes import PhonemeSyntaxError, strip_punctuation, tokenize


class CorpusError(Exception):
    pass


class LengthMismatchError(CorpusError):
    def __init__(self, n_source: int, n_target: int):
        super().__init__(f"source has {n_source} lines but target has {n_target}")
        self.n_source = n_source
        self.n_target = n_target


class TooSmallError(CorpusError):
    pass


class Representation(str, enum.Enum):
    GRAPHEMIC = "graphemic"
    PHONEMIC = "phonemic"


@dataclass(frozen=True)
class ParallelPair:
    source: str
    target: str
    origin_line: int

    def __post_init__(self):
        if not self.source.strip() or not self.target.strip():
            raise ValueError(f"line {self.origin_line}: empty side in parallel pair")
        if self.origin_line < 1:
            raise ValueError("origin_line is 1-based")


@dataclass(frozen=True)
class ParallelCorpus:
    pairs: tuple[ParallelPair, ...] = ()
    source_lang: str = "en"
    target_lang: str = "de"
    representation: Representation = Representation.GRAPHEMIC
    # drop reasons and counts from the operation that produced this corpus
    dropped: Mapping[str, int] = field(default_factory=dict, compare=False)
    failures: tuple[tuple[int, str], ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "representation", Representation(self.representation))
        if self.representation is Representation.PHONEMIC:
            for pair in self.pairs:
                try:
                    tokenize(pair.source)
                    tokenize(pair.target)
                except PhonemeSyntaxError as exc:
                    raise CorpusError(f"line {pair.origin_line}: not a valid phoneme string: {exc}") from None

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def sources(self) -> list[str]:
        return [p.source for p in self.pairs]

    @property
    def targets(self) -> list[str]:
        return [p.target for p in self.pairs]

    def with_pairs(self, pairs: Iterable[ParallelPair], **kwargs) -> "ParallelCorpus":
        return replace(self, pairs=tuple(pairs), dropped=kwargs.pop("dropped", {}), **kwargs)

    def __add__(self, other: "ParallelCorpus") -> "ParallelCorpus":
        return self.with_pairs(self.pairs + other.pairs)


def _read_lines(path: str | os.PathLike) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return [line.rstrip("\r") for line in lines]


def load_parallel(
    source_path: str | os.PathLike,
    target_path: str | os.PathLike,
    source_lang: str = "en",
    target_lang: str = "de",
    representation: Representation | str = Representation.GRAPHEMIC,
) -> ParallelCorpus:
    """Pair line ``i`` of both files; pairs with an empty side are dropped."""
    src = _read_lines(source_path)
    tgt = _read_lines(target_path)
    if len(src) != len(tgt):
        raise LengthMismatchError(len(src), len(tgt))
    pairs = []
    empty = 0
    for i, (s, t) in enumerate(zip(src, tgt), start=1):
        if not s.strip() or not t.strip():
            empty += 1
            continue
        pairs.append(ParallelPair(s, t, i))
    return ParallelCorpus(
        tuple(pairs), source_lang, target_lang, Representation(representation), {"empty": empty}
    )


def write_corpus(corpus: ParallelCorpus, source_path: str | os.PathLike, target_path: str | os.PathLike) -> None:
    for path, lines in ((source_path, corpus.sources), (target_path, corpus.targets)):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(line + "\n" for line in lines)


def strip_corpus_punctuation(corpus: ParallelCorpus) -> ParallelCorpus:
    """Remove punctuation from both sides, dropping pairs that become empty."""
    phonemic = corpus.representation is Representation.PHONEMIC
    pairs = []
    emptied = 0
    for p in corpus.pairs:
        s = strip_punctuation(p.source, phonemic=phonemic)
        t = strip_punctuation(p.target, phonemic=phonemic)
        if s and t:
            pairs.append(ParallelPair(s, t, p.origin_line))
        else:
            emptied += 1
    return corpus.with_pairs(pairs, dropped={"emptied_by_punctuation": emptied})


def phonemize_corpus(
    corpus: ParallelCorpus,
    source_backend: G2pBackendSpec | Phonemizer,
    target_backend: G2pBackendSpec | Phonemizer,
    workers: int = 1,
    max_errors: int | None = None,
) -> ParallelCorpus:
    """Phonemize both sides of a graphemic corpus.

    Pairs where either side fails to phonemize are dropped; the failures are
    kept on the result as ``(origin_line, message)``.
    """
    if corpus.representation is not Representation.GRAPHEMIC:
        raise CorpusError("phonemize_corpus expects a graphemic corpus")
    results = []
    failures: list[tuple[int, str]] = []
    for side, backend in ((corpus.sources, source_backend), (corpus.targets, target_backend)):
        summary = StreamSummary()
        results.append(list(phonemize_stream(side, backend, workers, summary, max_errors)))
        failures += [(corpus.pairs[n - 1].origin_line, msg) for n, msg in summary.errors]
    pairs = []
    for pair, s, t in zip(corpus.pairs, *results):
        if s and t:
            pairs.append(ParallelPair(s, t, pair.origin_line))
        elif s is not None and t is not None:
            failures.append((pair.origin_line, "phonemized to an empty line"))
    failures.sort()
    return ParallelCorpus(
        tuple(pairs),
        corpus.source_lang,
        corpus.target_lang,
        Representation.PHONEMIC,
        {"g2p_failure": len(corpus) - len(pairs)},
        tuple(failures),
    )


def split_corpus(
    corpus: ParallelCorpus, train_fraction: float, seed: int
) -> tuple[ParallelCorpus, ParallelCorpus]:
    """Seeded train/validation split; both parts keep the input order."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(corpus)
    n_train = math.ceil(train_fraction * n)
    if n < 2 or n_train == n or n_train == 0:
        raise TooSmallError(f"cannot split {n} pairs with train_fraction={train_fraction}")
    order = np.random.default_rng(seed).permutation(n)
    train_idx = sorted(order[:n_train].tolist())
    valid_idx = sorted(order[n_train:].tolist())
    return (
        corpus.with_pairs(corpus.pairs[i] for i in train_idx),
        corpus.with_pairs(corpus.pairs[i] for i in valid_idx),
    )


def filter_pairs(corpus: ParallelCorpus, max_len: int, ratio_cap: float) -> ParallelCorpus:
    """Drop over-long pairs and pairs whose side lengths are too unbalanced.

    Lengths are whitespace token counts.  A pair failing both tests is counted
    under ``too_long``.
    """
    if max_len < 1 or ratio_cap < 1:
        raise ValueError("need max_len >= 1 and ratio_cap >= 1")
    kept = []
    dropped = Counter({"too_long": 0, "ratio": 0})
    for pair in corpus.pairs:
        ls, lt = len(pair.source.split()), len(pair.target.split())
        if ls > max_len or lt > max_len:
            dropped["too_long"] += 1
        elif max(ls, lt) / max(min(ls, lt), 1) > ratio_cap:
            dropped["ratio"] += 1
        else:
            kept.append(pair)
    return corpus.with_pairs(kept, dropped=dict(dropped))


def align_by_origin(a: ParallelCorpus, b: ParallelCorpus) -> tuple[ParallelCorpus, ParallelCorpus]:
    """Restrict two corpora to the origin lines they share."""
    common = {p.origin_line for p in a.pairs} & {p.origin_line for p in b.pairs}
    return (
        a.with_pairs(p for p in a.pairs if p.origin_line in common),
        b.with_pairs(p for p in b.pairs if p.origin_line in common),
    )


HISTOGRAM_WIDTH = 10


@dataclass(frozen=True)
class CorpusStats:
    pair_count: int = 0
    source_tokens: int = 0
    target_tokens: int = 0
    source_symbols: frozenset[str] = frozenset()
    target_symbols: frozenset[str] = frozenset()
    # bucket start (in tokens) -> number of sentences
    source_histogram: Mapping[int, int] = field(default_factory=dict)
    target_histogram: Mapping[int, int] = field(default_factory=dict)

    @property
    def distinct_source_symbols(self) -> int:
        return len(self.source_symbols)

    @property
    def distinct_target_symbols(self) -> int:
        return len(self.target_symbols)

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        return CorpusStats(
            self.pair_count + other.pair_count,
            self.source_tokens + other.source_tokens,
            self.target_tokens + other.target_tokens,
            self.source_symbols | other.source_symbols,
            self.target_symbols | other.target_symbols,
            dict(Counter(self.source_histogram) + Counter(other.source_histogram)),
            dict(Counter(self.target_histogram) + Counter(other.target_histogram)),
        )

    def to_kv(self) -> str:
        rows = [
            ("pairs", self.pair_count),
            ("source_tokens", self.source_tokens),
            ("target_tokens", self.target_tokens),
            ("source_symbols", self.distinct_source_symbols),
            ("target_symbols", self.distinct_target_symbols),
        ]
        rows += [(f"source_len_{k}", v) for k, v in sorted(self.source_histogram.items())]
        rows += [(f"target_len_{k}", v) for k, v in sorted(self.target_histogram.items())]
        return "".join(f"{k}={v}\n" for k, v in rows)


def corpus_stats(corpus: ParallelCorpus) -> CorpusStats:
    """Token counts (words after punctuation removal), symbol inventories, length histograms."""
    phonemic = corpus.representation is Representation.PHONEMIC
    counts = [0, 0]
    symbols: list[set[str]] = [set(), set()]
    hists: list[Counter] = [Counter(), Counter()]
    for pair in corpus.pairs:
        for k, side in enumerate((pair.source, pair.target)):
            words = strip_punctuation(side, phonemic=phonemic).split()
            counts[k] += len(words)
            symbols[k].update(side.replace(" ", ""))
            hists[k][len(words) // HISTOGRAM_WIDTH * HISTOGRAM_WIDTH] += 1
    return CorpusStats(
        len(corpus),
        counts[0],
        counts[1],
        frozenset(symbols[0]),
        frozenset(symbols[1]),
        dict(hists[0]),
        dict(hists[1]),
    )
