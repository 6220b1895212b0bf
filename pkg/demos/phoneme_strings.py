"""Tokenize, render and normalize espeak-style phoneme strings."""

from __future__ import annotations

from phonemt.phonemes import (
    STRIP_STRESS,
    NormalizationPolicy,
    normalize_text,
    phoneme_equivalent,
    render,
    tokenize,
)


def main() -> None:
    text = "ɪ,ɛdʒɪstrɪ'eɪʃən fəðɪ ɪv'ent"
    seq = tokenize(text)
    print("tokens of the first word:")
    for tok in seq.words[0]:
        print(f"  {tok!r}")
    print("rendered back:", render(seq))

    # Unicode stress and length marks render as their ASCII forms.
    print("ˈaːbə ->", render(tokenize("ˈaːbə")))

    print("stress stripped:", normalize_text(text, STRIP_STRESS))

    merged = NormalizationPolicy(variant_classes=frozenset({frozenset({"ɜ", "a"})}))
    print("'y:ba' ~ 'y:bɜ' under a variant class:", phoneme_equivalent(tokenize("y:ba"), tokenize("y:bɜ"), merged))


if __name__ == "__main__":
    main()
