"""Corpus BLEU with graphemic, phoneme-normalized and back-converted modes.

Scores are on the 0-100 scale.  Tokenization is case-sensitive whitespace
splitting after punctuation removal; every report records those settings.
"""

from __future__ import annotations

import enum
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .g2p import Lexicon
from .phonemes import (
    STRIP_STRESS,
    NormalizationPolicy,
    normalize,
    parse,
    render,
    strip_punctuation,
)


class EvalError(Exception):
    pass


class EmptyCorpusError(EvalError):
    pass


class LengthMismatchError(EvalError):
    pass


class TestSetMismatchError(EvalError):
    pass


class Smoothing(str, enum.Enum):
    NONE = "none"
    ADD_ONE = "add_one"


class EvalMode(str, enum.Enum):
    GRAPHEMIC = "graphemic"
    PHONEME_NORMALIZED = "phoneme_normalized"
    BACK_CONVERTED = "back_converted"


@dataclass(frozen=True)
class ReverseLexicon:
    """Normalized phoneme-word -> spelling."""

    policy: NormalizationPolicy
    entries: Mapping[str, str]
    collisions: int = 0

    @classmethod
    def from_lexicon(cls, lexicon: Lexicon, policy: NormalizationPolicy = STRIP_STRESS) -> "ReverseLexicon":
        # Homophones keep the first spelling in file order.
        entries: dict[str, str] = {}
        collisions = 0
        for key, phonemes in lexicon.entries.items():
            if "_" in key:
                continue
            norm = render(normalize(parse(phonemes, strict=False)[0], policy))
            if norm in entries:
                collisions += 1
                continue
            entries[norm] = lexicon.surface.get(key, key)
        return cls(policy, entries, collisions)


@dataclass(frozen=True)
class EvalConfig:
    mode: EvalMode = EvalMode.GRAPHEMIC
    policy: NormalizationPolicy = STRIP_STRESS
    reverse_lexicon: ReverseLexicon | None = None
    max_n: int = 4
    smoothing: Smoothing = Smoothing.NONE
    # capitalize the first word after back-conversion
    sentence_case: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", EvalMode(self.mode))
        object.__setattr__(self, "smoothing", Smoothing(self.smoothing))
        if self.mode is EvalMode.BACK_CONVERTED and self.reverse_lexicon is None:
            raise ValueError("back_converted mode needs a reverse lexicon")
        if self.max_n < 1:
            raise ValueError("max_n must be >= 1")


@dataclass(frozen=True)
class BleuReport:
    precisions: tuple[float, ...]
    brevity_penalty: float
    candidate_length: int
    reference_length: int
    score: float
    max_n: int
    smoothing: Smoothing
    matches: tuple[int, ...] = ()
    totals: tuple[int, ...] = ()
    sentences: int = 0
    settings: Mapping[str, str] = field(default_factory=dict)

    def to_kv(self) -> str:
        rows: list[tuple[str, object]] = [("score", f"{self.score:.6f}")]
        rows += [(f"p_{n}", f"{p:.6f}") for n, p in enumerate(self.precisions, start=1)]
        rows += [
            ("bp", f"{self.brevity_penalty:.6f}"),
            ("c", self.candidate_length),
            ("r", self.reference_length),
            ("sentences", self.sentences),
            ("max_n", self.max_n),
            ("smoothing", self.smoothing.value),
        ]
        rows += sorted(self.settings.items())
        return "".join(f"{k}={v}\n" for k, v in rows)

    def to_text(self) -> str:
        ps = "/".join(f"{100 * p:.1f}" for p in self.precisions)
        return (
            f"BLEU = {self.score:.2f} {ps} (BP = {self.brevity_penalty:.3f}, "
            f"ratio = {self.candidate_length / max(self.reference_length, 1):.3f}, "
            f"hyp_len = {self.candidate_length}, ref_len = {self.reference_length})\n"
        )


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def modified_precision(
    candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]], n: int
) -> tuple[int, int]:
    """Corpus-wide clipped n-gram matches and total candidate n-grams."""
    if len(candidates) != len(references):
        raise LengthMismatchError(f"{len(candidates)} candidates vs {len(references)} references")
    matches = total = 0
    for cand, ref in zip(candidates, references):
        cand_counts = ngram_counts(cand, n)
        ref_counts = ngram_counts(ref, n)
        matches += sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        total += sum(cand_counts.values())
    return matches, total


def brevity_penalty(c: int, r: int) -> float:
    if c >= r:
        return 1.0
    if c == 0:
        return 0.0
    return math.exp(1.0 - r / c)


def bleu_from_tokens(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    max_n: int = 4,
    smoothing: Smoothing | str = Smoothing.NONE,
    settings: Mapping[str, str] | None = None,
) -> BleuReport:
    if len(candidates) != len(references):
        raise LengthMismatchError(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise EmptyCorpusError("cannot score an empty corpus")
    smoothing = Smoothing(smoothing)
    matches, totals, precisions = [], [], []
    for n in range(1, max_n + 1):
        m, t = modified_precision(candidates, references, n)
        matches.append(m)
        totals.append(t)
        if smoothing is Smoothing.ADD_ONE:
            precisions.append((m + 1) / (t + 1))
        else:
            precisions.append(m / t if t else 0.0)
    c = sum(len(x) for x in candidates)
    r = sum(len(x) for x in references)
    bp = brevity_penalty(c, r)
    if min(precisions) > 0 and bp > 0:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    else:
        score = 0.0
    return BleuReport(
        tuple(precisions), bp, c, r, score, max_n, smoothing,
        tuple(matches), tuple(totals), len(candidates), dict(settings or {}),
    )


def back_convert(
    phoneme_line: str,
    reverse_lexicon: ReverseLexicon,
    policy: NormalizationPolicy | None = None,
    sentence_case: bool = False,
) -> tuple[str, int]:
    """Replace each phoneme-word by its spelling; unknown words stay phonemic.

    Returns the converted line and the number of words that were not found.
    """
    policy = policy or reverse_lexicon.policy
    words = []
    misses = 0
    for raw in phoneme_line.split():
        seq, _ = parse(raw, strict=False)
        key = render(normalize(seq, policy))
        hit = reverse_lexicon.entries.get(key)
        if hit is None:
            misses += 1
            words.append(raw)
        else:
            words.append(hit)
    if sentence_case and words:
        words[0] = words[0][:1].upper() + words[0][1:]
    return " ".join(words), misses


def _phoneme_words(line: str, policy: NormalizationPolicy) -> list[str]:
    line = strip_punctuation(line, phonemic=True)
    return render(normalize(parse(line, strict=False)[0], policy)).split()


def prepare_tokens(lines: Sequence[str], config: EvalConfig, side: str) -> tuple[list[list[str]], int]:
    """Tokenize one side for scoring; returns tokens and back-conversion misses."""
    misses = 0
    out = []
    for line in lines:
        if config.mode is EvalMode.PHONEME_NORMALIZED:
            out.append(_phoneme_words(line, config.policy))
            continue
        if config.mode is EvalMode.BACK_CONVERTED and side == "candidate":
            assert config.reverse_lexicon is not None
            line = strip_punctuation(line, phonemic=True)
            line, miss = back_convert(line, config.reverse_lexicon, config.policy, config.sentence_case)
            misses += miss
        out.append(strip_punctuation(line).split())
    return out, misses


def corpus_bleu(
    candidates: Sequence[str], references: Sequence[str], config: EvalConfig | None = None
) -> BleuReport:
    """Score candidate lines against single references.

    In back-converted mode the candidates are phoneme lines and the
    references are ordinary text.
    """
    config = config or EvalConfig()
    if len(candidates) != len(references):
        raise LengthMismatchError(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise EmptyCorpusError("cannot score an empty corpus")
    cand, misses = prepare_tokens(candidates, config, "candidate")
    ref, _ = prepare_tokens(references, config, "reference")
    settings = {
        "mode": config.mode.value,
        "case_sensitive": "true",
        "tokenizer": "whitespace",
        "punctuation": "stripped",
    }
    if config.mode is EvalMode.BACK_CONVERTED:
        settings["unresolved_words"] = str(misses)
    return bleu_from_tokens(cand, ref, config.max_n, config.smoothing, settings)


def sentence_bleu(candidate: str, reference: str, config: EvalConfig | None = None) -> BleuReport:
    config = config or EvalConfig(smoothing=Smoothing.ADD_ONE)
    return corpus_bleu([candidate], [reference], config)


def _read(path: str | os.PathLike) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return text.split("\n")[:-1] if text.endswith("\n") else (text.split("\n") if text else [])


def score_files(
    candidate_path: str | os.PathLike, reference_path: str | os.PathLike, config: EvalConfig | None = None
) -> BleuReport:
    return corpus_bleu(_read(candidate_path), _read(reference_path), config)


@dataclass(frozen=True)
class Comparison:
    reference: BleuReport
    phoneme: BleuReport

    @property
    def delta(self) -> float:
        return self.reference.score - self.phoneme.score

    def to_text(self, digits: int = 2) -> str:
        fmt = f"{{:.{digits}f}}"
        rows = [("Reference Model", self.reference), ("Phoneme Model", self.phoneme)]
        width = max(len(name) for name, _ in rows) + 2
        lines = [f"{'Model':<{width}}BLEU score"]
        lines += [f"{name:<{width}}{fmt.format(rep.score)}" for name, rep in rows]
        lines.append(f"{'Delta':<{width}}{fmt.format(self.delta)}")
        lines.append("")
        n = max(self.reference.max_n, self.phoneme.max_n)
        lines.append(f"{'n':<4}{'p_n reference':>15}{'p_n phoneme':>15}")
        for k in range(n):
            a = self.reference.precisions[k] if k < len(self.reference.precisions) else float("nan")
            b = self.phoneme.precisions[k] if k < len(self.phoneme.precisions) else float("nan")
            lines.append(f"{k + 1:<4}{a:>15.4f}{b:>15.4f}")
        lines.append(
            f"{'BP':<4}{self.reference.brevity_penalty:>15.4f}{self.phoneme.brevity_penalty:>15.4f}"
        )
        return "\n".join(lines) + "\n"

    def to_kv(self) -> str:
        rows: list[tuple[str, object]] = [
            ("reference.score", f"{self.reference.score:.6f}"),
            ("phoneme.score", f"{self.phoneme.score:.6f}"),
            ("delta", f"{self.delta:.6f}"),
            ("sentences", self.reference.sentences),
        ]
        for name, rep in (("reference", self.reference), ("phoneme", self.phoneme)):
            rows += [(f"{name}.p_{n}", f"{p:.6f}") for n, p in enumerate(rep.precisions, start=1)]
            rows.append((f"{name}.bp", f"{rep.brevity_penalty:.6f}"))
        return "".join(f"{k}={v}\n" for k, v in rows)


def compare_report(reference_eval: BleuReport, phoneme_eval: BleuReport) -> Comparison:
    if reference_eval.sentences != phoneme_eval.sentences:
        raise TestSetMismatchError(
            f"reference scored {reference_eval.sentences} sentences, phoneme {phoneme_eval.sentences}"
        )
    return Comparison(reference_eval, phoneme_eval)
