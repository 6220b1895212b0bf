"""A small synthetic English-German language for hermetic end-to-end runs.

Sentences follow one template::

    The [adj] N1 V the [adj] N2 [adv].
    Der [adj-e] N1 V [adv] den [adj-en] N2.

German articles and adjective endings agree with the noun's gender and case,
and the adverb moves behind the verb, so the mapping is not a word-for-word
copy.  Every word is covered by the bundled lexicons in ``phonemt/data``.
"""

from __future__ import annotations

import random
from importlib import resources
from pathlib import Path

# english, german, gender
NOUNS = [
    ("dog", "Hund", "m"),
    ("cat", "Katze", "f"),
    ("child", "Kind", "n"),
    ("man", "Mann", "m"),
    ("woman", "Frau", "f"),
    ("horse", "Pferd", "n"),
    ("teacher", "Lehrer", "m"),
    ("bird", "Vogel", "m"),
]
ADJECTIVES = [("small", "klein"), ("big", "groß"), ("old", "alt"), ("young", "jung")]
VERBS = [("sees", "sieht"), ("finds", "findet"), ("likes", "mag"), ("hears", "hört")]
ADVERBS = [("today", "heute"), ("often", "oft"), ("again", "wieder")]

NOMINATIVE = {"m": "der", "f": "die", "n": "das"}
ACCUSATIVE = {"m": "den", "f": "die", "n": "das"}

TOY_SIZE = 200
TOY_SEED = 2017


def _noun_phrase(rng: random.Random, case: str) -> tuple[list[str], list[str]]:
    en_noun, de_noun, gender = rng.choice(NOUNS)
    article = (NOMINATIVE if case == "nom" else ACCUSATIVE)[gender]
    en, de = ["the"], [article]
    if rng.random() < 0.5:
        en_adj, de_adj = rng.choice(ADJECTIVES)
        ending = "en" if case == "acc" and gender == "m" else "e"
        en.append(en_adj)
        de.append(de_adj + ending)
    en.append(en_noun)
    de.append(de_noun)
    return en, de


def sentence_pair(rng: random.Random) -> tuple[str, str]:
    subj_en, subj_de = _noun_phrase(rng, "nom")
    obj_en, obj_de = _noun_phrase(rng, "acc")
    verb_en, verb_de = rng.choice(VERBS)
    en = subj_en + [verb_en] + obj_en
    de = subj_de + [verb_de]
    if rng.random() < 0.5:
        adv_en, adv_de = rng.choice(ADVERBS)
        en.append(adv_en)
        de.append(adv_de)
    de += obj_de
    en[0] = en[0].capitalize()
    de[0] = de[0].capitalize()
    return " ".join(en) + ".", " ".join(de) + "."


def generate(n: int = TOY_SIZE, seed: int = TOY_SEED) -> list[tuple[str, str]]:
    """Return ``n`` distinct sentence pairs drawn with a seeded generator."""
    rng = random.Random(seed)
    seen: set[tuple[str, str]] = set()
    pairs: list[tuple[str, str]] = []
    while len(pairs) < n:
        pair = sentence_pair(rng)
        if pair not in seen:
            seen.add(pair)
            pairs.append(pair)
    return pairs


def vocabulary() -> tuple[set[str], set[str]]:
    """All lowercase word forms the grammar can emit, per language."""
    en = {"the"} | {n[0] for n in NOUNS} | {a for a, _ in ADJECTIVES}
    en |= {v for v, _ in VERBS} | {a for a, _ in ADVERBS}
    de = set(NOMINATIVE.values()) | set(ACCUSATIVE.values()) | {n[1].lower() for n in NOUNS}
    de |= {a + e for _, a in ADJECTIVES for e in ("e", "en")}
    de |= {v for _, v in VERBS} | {a for _, a in ADVERBS}
    return en, de


def data_dir() -> Path:
    return Path(str(resources.files("phonemt") / "data"))


def toy_paths() -> tuple[Path, Path]:
    base = data_dir() / "toy"
    return base / "toy.en", base / "toy.de"


def write_toy(directory: str | Path, n: int = TOY_SIZE, seed: int = TOY_SEED) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pairs = generate(n, seed)
    src, tgt = directory / "toy.en", directory / "toy.de"
    src.write_text("".join(s + "\n" for s, _ in pairs), encoding="utf-8")
    tgt.write_text("".join(t + "\n" for _, t in pairs), encoding="utf-8")
    return src, tgt
