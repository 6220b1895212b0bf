from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<s>", "</s>", "<unk>")
UNK_MARKER = "�"


class VocabError(Exception):
    pass


class EmptyCorpusError(VocabError):
    pass


class IndexOutOfRangeError(VocabError, IndexError):
    pass


class VocabMode(str, enum.Enum):
    CHARACTER = "character"
    WORD = "word"


@dataclass(frozen=True)
class Vocabulary:
    """Symbol inventory with the four specials at indices 0-3.

    In character mode every Unicode scalar (including the space) is one
    symbol, so IPA letters such as ``ʃ`` or ``ŋ`` need no special handling.
    """

    symbols: tuple[str, ...]
    mode: VocabMode = VocabMode.CHARACTER
    _index: dict[str, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "mode", VocabMode(self.mode))
        if self.symbols[:4] != SPECIALS:
            raise VocabError("vocabulary must start with the special symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise VocabError("duplicate symbols in vocabulary")
        if self.mode is VocabMode.CHARACTER and any(len(s) != 1 for s in self.symbols[4:]):
            raise VocabError("character vocabularies hold single code points")
        self._index.update({s: i for i, s in enumerate(self.symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index and self._index[symbol] >= 4

    def split(self, text: str) -> list[str]:
        return list(text) if self.mode is VocabMode.CHARACTER else text.split()

    def join(self, symbols: Iterable[str]) -> str:
        return "".join(symbols) if self.mode is VocabMode.CHARACTER else " ".join(symbols)

    def encode(self, text: str, wrap: bool = True) -> list[int]:
        ids = [self._index.get(s, UNK) if s not in SPECIALS else UNK for s in self.split(text)]
        return [BOS, *ids, EOS] if wrap else ids

    def decode(self, indices: Sequence[int]) -> str:
        out = []
        for i in indices:
            i = int(i)
            if not 0 <= i < len(self.symbols):
                raise IndexOutOfRangeError(f"index {i} outside vocabulary of size {len(self)}")
            if i == UNK:
                out.append(UNK_MARKER)
            elif i >= 4:
                out.append(self.symbols[i])
        return self.join(out)

    def to_json(self) -> str:
        return json.dumps({"mode": self.mode.value, "symbols": list(self.symbols)}, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        data = json.loads(text)
        return cls(tuple(data["symbols"]), VocabMode(data["mode"]))


def vocab_from_texts(texts: Iterable[str], mode: VocabMode | str = VocabMode.CHARACTER, min_count: int = 1) -> Vocabulary:
    """Frequency-descending, then lexicographic, after the specials."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    mode = VocabMode(mode)
    counts: Counter = Counter()
    for text in texts:
        counts.update(list(text) if mode is VocabMode.CHARACTER else text.split())
    kept = sorted((s for s, c in counts.items() if c >= min_count and s not in SPECIALS), key=lambda s: (-counts[s], s))
    return Vocabulary(SPECIALS + tuple(kept), mode)


def build_vocab(corpus, mode: VocabMode | str = VocabMode.CHARACTER, min_count: int = 1) -> tuple[Vocabulary, Vocabulary]:
    if len(corpus) == 0:
        raise EmptyCorpusError("cannot build a vocabulary from an empty corpus")
    return (
        vocab_from_texts(corpus.sources, mode, min_count),
        vocab_from_texts(corpus.targets, mode, min_count),
    )
