"""Structured IPA phoneme strings.

Phoneme strings use the notation printed by espeak-style phonemizers: words
are separated by single spaces, a stress mark precedes the stressed symbol and
a length mark follows the lengthened one.  Both the Unicode IPA marks
(``ˈ ˌ ː``) and their ASCII look-alikes (``' , :``) are accepted; rendering
always produces the ASCII style.

>>> render(tokenize("ɪvˈent kən biː"))
"ɪv'ent kən bi:"
"""

from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable

PRIMARY_MARKS = frozenset("ˈ'")
SECONDARY_MARKS = frozenset("ˌ,")
LENGTH_MARKS = frozenset("ː:")
STRESS_MARKS = PRIMARY_MARKS | SECONDARY_MARKS
MARKERS = STRESS_MARKS | LENGTH_MARKS

# Double-width ties join the next base symbol into the same token (d͡ʒ, t͜s).
TIE_BARS = frozenset("͜͡")


class PhonemeSyntaxError(ValueError):
    """Raised by strict tokenization on malformed phoneme strings."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message if position is None else f"{message} (at offset {position})")
        self.position = position


class EmptyWordError(PhonemeSyntaxError):
    """A phoneme-word is empty or a marker has no symbol to attach to."""


class Stress(enum.IntEnum):
    NONE = 0
    PRIMARY = 1
    SECONDARY = 2


@dataclass(frozen=True)
class PhonemeToken:
    base: str
    stress: Stress = Stress.NONE
    long: bool = False

    def __post_init__(self):
        if not self.base:
            raise ValueError("phoneme token base must be non-empty")
        if any(ch in MARKERS or ch.isspace() for ch in self.base):
            raise ValueError(f"token base {self.base!r} contains a marker or whitespace")
        if _is_combining(self.base[0]):
            raise ValueError(f"token base {self.base!r} starts with a combining mark")

    def render(self) -> str:
        prefix = {Stress.NONE: "", Stress.PRIMARY: "'", Stress.SECONDARY: ","}[self.stress]
        return prefix + self.base + (":" if self.long else "")


Word = tuple[PhonemeToken, ...]


@dataclass(frozen=True)
class PhonemeSequence:
    words: tuple[Word, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(tuple(w) for w in self.words))
        if any(len(w) == 0 for w in self.words):
            raise EmptyWordError("phoneme sequence contains an empty word")

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self):
        return iter(self.words)

    @property
    def tokens(self) -> list[PhonemeToken]:
        return [tok for word in self.words for tok in word]

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class NormalizationPolicy:
    """Rules for collapsing phonemic variants before comparison.

    ``variant_classes`` holds disjoint sets of base symbols that are treated
    as interchangeable; each member is replaced by the lexicographically
    smallest symbol of its class.  ``canonicalize_length`` is kept for
    configuration symmetry: tokens already carry a single boolean length flag,
    so both length spellings are merged at parse time regardless.
    """

    strip_primary_stress: bool = True
    strip_secondary_stress: bool = True
    canonicalize_length: bool = True
    strip_punctuation: bool = True
    variant_classes: frozenset[frozenset[str]] = frozenset()
    _representative: dict[str, str] = field(
        default_factory=dict, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        classes = frozenset(frozenset(c) for c in self.variant_classes if len(c) > 0)
        object.__setattr__(self, "variant_classes", classes)
        seen: dict[str, frozenset[str]] = {}
        for cls in classes:
            for sym in cls:
                if sym in seen:
                    raise ValueError(f"variant classes overlap on symbol {sym!r}")
                seen[sym] = cls
        self._representative.update({sym: min(cls) for sym, cls in seen.items()})

    def representative(self, base: str) -> str:
        return self._representative.get(base, base)

    @classmethod
    def identity(cls) -> "NormalizationPolicy":
        return cls(False, False, True, False)


STRIP_STRESS = NormalizationPolicy()


def _is_combining(ch: str) -> bool:
    return unicodedata.combining(ch) != 0 or unicodedata.category(ch) in ("Mn", "Me")


def parse(text: str, strict: bool = True) -> tuple[PhonemeSequence, int]:
    """Tokenize ``text`` and return the sequence plus the number of dropped items.

    In strict mode any empty word or dangling marker raises
    :class:`EmptyWordError`.  In permissive mode those are dropped and
    counted instead.
    """
    words: list[Word] = []
    dropped = 0
    offset = 0
    raw_words = text.split(" ") if text else []
    for raw in raw_words:
        if not raw:
            if strict:
                raise EmptyWordError("empty phoneme-word (repeated, leading or trailing space)", offset)
            offset += 1
            continue
        word, n_bad = _parse_word(raw, offset, strict)
        dropped += n_bad
        if word:
            words.append(word)
        elif strict:  # pragma: no cover - _parse_word already raised
            raise EmptyWordError("phoneme-word has no symbols", offset)
        offset += len(raw) + 1
    return PhonemeSequence(tuple(words)), dropped


def _parse_word(raw: str, offset: int, strict: bool) -> tuple[Word, int]:
    tokens: list[list] = []  # [base, stress, long]
    pending: Stress | None = None
    pending_at = 0
    dropped = 0
    join_next = False

    def dangling(msg: str, pos: int):
        nonlocal dropped
        if strict:
            raise EmptyWordError(msg, offset + pos)
        dropped += 1

    for i, ch in enumerate(raw):
        if ch.isspace():
            if strict:
                raise PhonemeSyntaxError(f"unexpected whitespace {ch!r} inside phoneme-word", offset + i)
            dropped += 1
            continue
        if ch in STRESS_MARKS:
            if pending is not None:
                dangling("stress mark not followed by a symbol", pending_at)
            pending = Stress.PRIMARY if ch in PRIMARY_MARKS else Stress.SECONDARY
            pending_at = i
            join_next = False
        elif ch in LENGTH_MARKS:
            if not tokens or pending is not None or tokens[-1][2]:
                dangling("length mark without a preceding symbol", i)
                continue
            tokens[-1][2] = True
            join_next = False
        elif _is_combining(ch):
            if not tokens or pending is not None or tokens[-1][2]:
                dangling("combining mark without a base symbol", i)
                continue
            tokens[-1][0] += ch
            join_next = ch in TIE_BARS
        elif join_next and tokens:
            tokens[-1][0] += ch
            join_next = False
        else:
            tokens.append([ch, pending or Stress.NONE, False])
            pending = None
            join_next = False
    if pending is not None:
        dangling("stress mark at end of word", pending_at)
    if not tokens and not dropped:
        dangling("phoneme-word contains no symbols", 0)
    return tuple(PhonemeToken(b, s, l) for b, s, l in tokens), dropped


def tokenize(text: str, strict: bool = True) -> PhonemeSequence:
    """Parse a phoneme string into words of :class:`PhonemeToken`.

    Stress marks bind to the following symbol, length marks to the preceding
    one, and combining diacritics to the preceding base symbol.
    """
    return parse(text, strict)[0]


def render(seq: PhonemeSequence) -> str:
    return " ".join("".join(tok.render() for tok in word) for word in seq.words)


def canonical_form(text: str) -> str:
    """Rewrite Unicode stress/length marks in the ASCII style."""
    return render(tokenize(text))


def _is_punct_base(base: str) -> bool:
    return all(unicodedata.category(ch).startswith("P") for ch in base)


def normalize(seq: PhonemeSequence, policy: NormalizationPolicy = STRIP_STRESS) -> PhonemeSequence:
    words = []
    for word in seq.words:
        new_word = []
        for tok in word:
            if policy.strip_punctuation and _is_punct_base(tok.base):
                continue
            stress = tok.stress
            if (stress is Stress.PRIMARY and policy.strip_primary_stress) or (
                stress is Stress.SECONDARY and policy.strip_secondary_stress
            ):
                stress = Stress.NONE
            new_word.append(PhonemeToken(policy.representative(tok.base), stress, tok.long))
        if new_word:
            words.append(tuple(new_word))
    return PhonemeSequence(tuple(words))


def normalize_text(text: str, policy: NormalizationPolicy = STRIP_STRESS, strict: bool = True) -> str:
    return render(normalize(tokenize(text, strict), policy))


def phoneme_equivalent(
    a: PhonemeSequence, b: PhonemeSequence, policy: NormalizationPolicy = STRIP_STRESS
) -> bool:
    return normalize(a, policy) == normalize(b, policy)


def _drop_dangling_ascii_markers(text: str) -> str:
    out = []
    n = len(text)
    for i, ch in enumerate(text):
        if ch in "',":
            if i + 1 >= n or text[i + 1].isspace() or text[i + 1] in MARKERS:
                continue
        elif ch == ":":
            if i == 0 or text[i - 1].isspace() or text[i - 1] in MARKERS:
                continue
        out.append(ch)
    return "".join(out)


def strip_punctuation(text: str, extra: Iterable[str] = (), phonemic: bool = False) -> str:
    """Remove punctuation and squeeze whitespace.

    Every character in a Unicode ``P*`` category or in ``extra`` is removed.
    With ``phonemic=True`` the ASCII stress and length marks are kept where
    they attach to a symbol, since there they are phonemic notation rather
    than punctuation.

    >>> strip_punctuation("a, b. c!")
    'a b c'
    """
    extra = set(extra)
    if phonemic:
        text = _drop_dangling_ascii_markers(text)
        keep = {"'", ",", ":"}
    else:
        keep = set()
    kept = [
        ch
        for ch in text
        if ch in keep or (ch not in extra and not unicodedata.category(ch).startswith("P"))
    ]
    out = " ".join("".join(kept).split())
    return _drop_dangling_ascii_markers(out) if phonemic else out
