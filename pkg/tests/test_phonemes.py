from __future__ import annotations

import itertools
import random
import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonemt.phonemes import (
    MARKERS,
    STRIP_STRESS,
    EmptyWordError,
    NormalizationPolicy,
    PhonemeSequence,
    PhonemeSyntaxError,
    PhonemeToken,
    Stress,
    canonical_form,
    normalize,
    normalize_text,
    parse,
    phoneme_equivalent,
    render,
    strip_punctuation,
    tokenize,
)

# Bases cover plain letters, IPA letters, a tie-bar affricate and a nasalized vowel.
BASES = ["a", "e", "n", "t", "ɪ", "ʊ", "ɛ", "ç", "ŋ", "ɜ", "ʃ", "ə", "d͡ʒ", "t͡s", "ã"]

tokens = st.builds(
    PhonemeToken,
    st.sampled_from(BASES),
    st.sampled_from(list(Stress)),
    st.booleans(),
)
words = st.lists(tokens, min_size=1, max_size=6).map(tuple)
sequences = st.lists(words, min_size=0, max_size=5).map(lambda ws: PhonemeSequence(tuple(ws)))


def tok(base: str, stress: Stress = Stress.NONE, long: bool = False) -> PhonemeToken:
    return PhonemeToken(base, stress, long)


class TestTokenize:
    def test_sample_model_output(self):
        seq = tokenize("n'ɪçt")
        assert seq.words == ((tok("n"), tok("ɪ", Stress.PRIMARY), tok("ç"), tok("t")),)

    def test_unicode_and_ascii_marks_agree(self):
        assert tokenize("ɪvˈent kən biː") == tokenize("ɪv'ent kən bi:")
        assert tokenize("ˌaˈb") == tokenize(",a'b")

    def test_length_binds_left_stress_binds_right(self):
        (word,) = tokenize(",y:bɜ").words
        assert word[0] == tok("y", Stress.SECONDARY, True)
        assert word[1:] == (tok("b"), tok("ɜ"))

    def test_tie_bar_affricate_is_one_token(self):
        (word,) = tokenize("d͡ʒa").words
        assert [t.base for t in word] == ["d͡ʒ", "a"]

    def test_combining_diacritic_attaches_to_base(self):
        (word,) = tokenize("ãn").words
        assert [t.base for t in word] == ["ã", "n"]

    @pytest.mark.parametrize("text", ["a  b", " a", "a ", "'", "a ' b", "a:'"])
    def test_strict_rejects_empty_or_dangling(self, text):
        with pytest.raises(EmptyWordError):
            tokenize(text)

    def test_strict_error_carries_position(self):
        with pytest.raises(EmptyWordError) as info:
            tokenize("ab  c")
        assert info.value.position == 3

    def test_permissive_drops_and_counts(self):
        seq, dropped = parse("a  b '", strict=False)
        assert render(seq) == "a b"
        assert dropped == 1

    def test_leading_length_mark_is_dangling(self):
        with pytest.raises(EmptyWordError):
            tokenize(":a")
        seq, dropped = parse(":a", strict=False)
        assert render(seq) == "a" and dropped == 1

    def test_internal_tab_rejected(self):
        with pytest.raises(PhonemeSyntaxError):
            tokenize("a\tb")

    def test_empty_text_is_empty_sequence(self):
        assert tokenize("") == PhonemeSequence(())


class TestRender:
    def test_single_token(self):
        assert render(PhonemeSequence(((tok("a"),),))) == "a"

    def test_sample_output(self):
        seq = PhonemeSequence(((tok("n"), tok("ɪ", Stress.PRIMARY), tok("ç"), tok("t")),))
        assert render(seq) == "n'ɪçt"

    @pytest.mark.parametrize(
        "text",
        [
            "ɪ,ɛdʒɪstrɪ'eɪʃən fəðɪ ɪv'ent kən bi: səbm'itɪd",
            "di: 'anm,ɛldɔŋ tsu:r fər'anʃt,altɔŋ k,an f'o:rgən,əmən v,ɛrdən",
        ],
    )
    def test_golden_strings_are_fixpoints(self, text):
        assert render(tokenize(text)) == text

    def test_canonical_form_rewrites_unicode_marks(self):
        assert canonical_form("ˈʊmzˌɛtsʊŋ ˌyːbɜ") == "'ʊmz,ɛtsʊŋ ,y:bɜ"

    def test_token_rejects_marker_in_base(self):
        with pytest.raises(ValueError):
            PhonemeToken("a'")
        with pytest.raises(ValueError):
            PhonemeToken("̃a")

    def test_sequence_rejects_empty_word(self):
        with pytest.raises(EmptyWordError):
            PhonemeSequence(((),))


class TestNormalize:
    def test_sample_word1(self):
        assert normalize_text("'ʊmz,ɛtsʊŋ", STRIP_STRESS) == "ʊmzɛtsʊŋ"

    def test_sample_word3(self):
        assert normalize_text(",y:bɜ", STRIP_STRESS) == "y:bɜ"

    def test_reference_form_unchanged(self):
        assert normalize_text("nɪçt") == "nɪçt"

    def test_selective_stress_stripping(self):
        keep_primary = NormalizationPolicy(strip_primary_stress=False)
        assert normalize_text("'ʊmz,ɛtsʊŋ", keep_primary) == "'ʊmzɛtsʊŋ"
        keep_secondary = NormalizationPolicy(strip_secondary_stress=False)
        assert normalize_text("'ʊmz,ɛtsʊŋ", keep_secondary) == "ʊmz,ɛtsʊŋ"

    def test_variant_class_representative_is_smallest(self):
        policy = NormalizationPolicy(variant_classes=frozenset({frozenset({"ɜ", "a"})}))
        assert policy.representative("ɜ") == "a"
        assert normalize_text("y:bɜ", policy) == "y:ba"

    def test_overlapping_classes_rejected(self):
        with pytest.raises(ValueError):
            NormalizationPolicy(variant_classes=frozenset({frozenset("ab"), frozenset("bc")}))

    def test_punctuation_tokens_dropped(self):
        assert normalize_text("ab . c?") == "ab c"
        assert normalize_text("ab . c?", NormalizationPolicy.identity()) == "ab . c?"

    def test_identity_policy_keeps_everything(self):
        assert normalize_text("'ʊmz,ɛtsʊŋ", NormalizationPolicy.identity()) == "'ʊmz,ɛtsʊŋ"


class TestEquivalence:
    variant = NormalizationPolicy(variant_classes=frozenset({frozenset({"ɜ", "a"})}))

    def test_sample_word1(self):
        assert phoneme_equivalent(tokenize("'ʊmz,ɛtsʊŋ"), tokenize("ʊmzɛtsʊŋ"), STRIP_STRESS)

    def test_sample_word3_variants(self):
        assert phoneme_equivalent(tokenize(",y:bɜ"), tokenize(",y:ba"), self.variant)
        assert phoneme_equivalent(tokenize(",y:ba"), tokenize("y:bɜ"), self.variant)
        assert not phoneme_equivalent(tokenize(",y:ba"), tokenize("y:bɜ"), STRIP_STRESS)

    def test_distinct_words(self):
        assert not phoneme_equivalent(tokenize("nɪçt"), tokenize("y:bɜ"), self.variant)

    def test_relation_laws_brute_force(self):
        # small alphabet so that many triples are equivalent and transitivity is exercised
        rng = random.Random(7)
        policy = NormalizationPolicy(variant_classes=frozenset({frozenset({"a", "e"})}))

        def rand_seq():
            n = rng.randint(1, 2)
            return PhonemeSequence(
                tuple(
                    (PhonemeToken(rng.choice("aen"), rng.choice(list(Stress)), rng.random() < 0.3),)
                    for _ in range(n)
                )
            )

        pool = [rand_seq() for _ in range(40)]
        eq = {(i, j): phoneme_equivalent(a, b, policy) for (i, a), (j, b) in itertools.product(enumerate(pool), repeat=2)}
        n_equal_pairs = 0
        for i, j, k in itertools.product(range(len(pool)), repeat=3):
            assert eq[i, i]
            assert eq[i, j] == eq[j, i]
            if eq[i, j] and eq[j, k]:
                assert eq[i, k]
                n_equal_pairs += i != j != k
        assert n_equal_pairs > 0


class TestStripPunctuation:
    def test_golden_source(self):
        text = "Registration for the event can be submitted."
        assert strip_punctuation(text) == "Registration for the event can be submitted"

    def test_empty(self):
        assert strip_punctuation("") == ""

    def test_category_rules(self):
        assert strip_punctuation("a, b. c!") == "a b c"

    def test_extra_set(self):
        assert strip_punctuation("a+b", extra="+") == "ab"

    def test_phonemic_keeps_attached_marks(self):
        assert strip_punctuation("k,an f'o:r. ' x", phonemic=True) == "k,an f'o:r x"

    def test_unicode_quotes(self):
        assert strip_punctuation("„Hallo“ – «x»") == "Hallo x"


class TestProperties:
    @settings(max_examples=1000)
    @given(sequences)
    def test_render_tokenize_round_trip(self, seq):
        assert tokenize(render(seq)) == seq

    @given(sequences)
    def test_marker_conservation(self, seq):
        text = render(seq)
        symbols = [
            ch for ch in text
            if ch not in MARKERS and not ch.isspace() and unicodedata.combining(ch) == 0
        ]
        # tie-bar affricates join two spacing symbols into one token
        ties = text.count("͡") + text.count("͜")
        assert len(tokenize(text).tokens) == len(symbols) - ties

    @given(sequences, st.booleans(), st.booleans(), st.sampled_from([(), ("a", "ɜ"), ("ɪ", "e", "ɛ")]))
    def test_normalize_idempotent(self, seq, p1, p2, cls):
        policy = NormalizationPolicy(p1, p2, variant_classes=frozenset({frozenset(cls)}) if cls else frozenset())
        once = normalize(seq, policy)
        assert normalize(once, policy) == once

    @given(st.text(max_size=60))
    def test_strip_punctuation_only_removes_punctuation(self, text):
        out = strip_punctuation(text)
        assert len(out) <= len(text)
        kept = [ch for ch in text if not unicodedata.category(ch).startswith(("P", "Z")) and not ch.isspace()]
        assert [ch for ch in out if not ch.isspace()] == kept
        assert out == out.strip()
        assert "  " not in out

    @given(sequences)
    def test_strip_punctuation_leaves_phoneme_strings_alone(self, seq):
        text = render(seq)
        assert strip_punctuation(text, phonemic=True) == text
