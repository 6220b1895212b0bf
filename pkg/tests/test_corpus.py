from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from phonemt.corpus import (
    CorpusError,
    CorpusStats,
    LengthMismatchError,
    ParallelCorpus,
    ParallelPair,
    Representation,
    TooSmallError,
    corpus_stats,
    filter_pairs,
    load_parallel,
    phonemize_corpus,
    split_corpus,
    strip_corpus_punctuation,
    write_corpus,
)
from phonemt.g2p import BackendKind, G2pBackendSpec, phonemize_line

GOLDEN_SOURCE = "Registration for the event can be submitted."
GOLDEN_TARGET = "Die Anmeldung zur Veranstaltung kann vorgenommen werden."
GOLDEN_TARGET_PHON = "di: 'anm,ɛldɔŋ tsu:r fər'anʃt,altɔŋ k,an f'o:rgən,əmən v,ɛrdən"


def lines(path: Path, rows) -> Path:
    path.write_text("".join(r + "\n" for r in rows), encoding="utf-8")
    return path


def corpus_of(rows, representation=Representation.GRAPHEMIC) -> ParallelCorpus:
    return ParallelCorpus(
        tuple(ParallelPair(s, t, i) for i, (s, t) in enumerate(rows, start=1)), representation=representation
    )


def backends(data_dir: Path) -> tuple[G2pBackendSpec, G2pBackendSpec]:
    lex, rules = data_dir / "lexicons", data_dir / "rules"
    return (
        G2pBackendSpec(BackendKind.LEXICON_RULES, "en", lex / "en.tsv", rules / "en.tsv"),
        G2pBackendSpec(BackendKind.LEXICON_RULES, "de", lex / "de.tsv", rules / "de.tsv"),
    )


class TestLoad:
    def test_two_lines(self, tmp_path):
        c = load_parallel(lines(tmp_path / "s", ["a", "b"]), lines(tmp_path / "t", ["x", "y"]))
        assert [p.origin_line for p in c] == [1, 2]
        assert c.sources == ["a", "b"] and c.targets == ["x", "y"]

    def test_length_mismatch(self, tmp_path):
        with pytest.raises(LengthMismatchError) as info:
            load_parallel(lines(tmp_path / "s", ["a"] * 10), lines(tmp_path / "t", ["b"] * 9))
        assert (info.value.n_source, info.value.n_target) == (10, 9)

    def test_golden_pair(self, tmp_path):
        c = load_parallel(lines(tmp_path / "s", [GOLDEN_SOURCE]), lines(tmp_path / "t", [GOLDEN_TARGET]))
        assert c.pairs == (ParallelPair(GOLDEN_SOURCE, GOLDEN_TARGET, 1),)

    def test_empty_sides_dropped_and_counted(self, tmp_path):
        c = load_parallel(lines(tmp_path / "s", ["a", "", "c"]), lines(tmp_path / "t", ["x", "y", "  "]))
        assert [p.origin_line for p in c] == [1]
        assert c.dropped["empty"] == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_parallel(tmp_path / "nope", tmp_path / "nope2")

    def test_phonemic_corpus_validated(self):
        with pytest.raises(CorpusError):
            corpus_of([("a  b", "c")], Representation.PHONEMIC)


class TestWrite:
    def test_round_trip(self, tmp_path):
        c = corpus_of([("a b", "x"), ("c", "y z"), ("d", "w")])
        write_corpus(c, tmp_path / "s", tmp_path / "t")
        assert load_parallel(tmp_path / "s", tmp_path / "t") == c

    def test_phonemic_round_trip_is_byte_exact(self, tmp_path):
        rows = [("ɪv'ent kən bi:", GOLDEN_TARGET_PHON), ("d͡ʒa ãn", ",y:bɜ")]
        c = corpus_of(rows, Representation.PHONEMIC)
        write_corpus(c, tmp_path / "s", tmp_path / "t")
        expected = "".join(t + "\n" for _, t in rows).encode("utf-8")
        assert (tmp_path / "t").read_bytes() == expected
        back = load_parallel(tmp_path / "s", tmp_path / "t", representation=Representation.PHONEMIC)
        assert back == c

    def test_empty_corpus_gives_empty_files(self, tmp_path):
        write_corpus(ParallelCorpus(), tmp_path / "s", tmp_path / "t")
        assert (tmp_path / "s").read_bytes() == b"" and (tmp_path / "t").read_bytes() == b""
        assert len(load_parallel(tmp_path / "s", tmp_path / "t")) == 0

    @given(st.lists(st.tuples(st.text("abcäöü ɪʃ'ː,.", min_size=1), st.text("xyzß ç", min_size=1)), max_size=8))
    def test_round_trip_property(self, rows):
        import tempfile

        rows = [(s, t) for s, t in rows if s.strip() and t.strip()]
        c = corpus_of(rows)
        with tempfile.TemporaryDirectory() as d:
            write_corpus(c, Path(d) / "s", Path(d) / "t")
            assert load_parallel(Path(d) / "s", Path(d) / "t") == c


class TestPhonemize:
    def test_empty_corpus(self, data_dir):
        out = phonemize_corpus(ParallelCorpus(), *backends(data_dir))
        assert len(out) == 0 and out.representation is Representation.PHONEMIC

    def test_matches_line_composition(self, data_dir):
        src_b, tgt_b = backends(data_dir)
        c = corpus_of([("The dog sees the cat.", "Der Hund sieht die Katze."), (GOLDEN_SOURCE, GOLDEN_TARGET)])
        out = phonemize_corpus(c, src_b, tgt_b)
        assert out.sources == [phonemize_line(s, src_b) for s in c.sources]
        assert out.targets == [phonemize_line(t, tgt_b) for t in c.targets]
        assert out.targets[1] == GOLDEN_TARGET_PHON
        assert [p.origin_line for p in out] == [1, 2]

    def test_input_untouched_and_failures_dropped(self, data_dir, tmp_path):
        src_b, _ = backends(data_dir)
        tgt_b = G2pBackendSpec(BackendKind.LEXICON_RULES, "de", lines(tmp_path / "lex", ["a\ta"]))
        c = corpus_of([("the dog", "a"), ("the cat", "qqq"), ("the man", "a a")])
        snapshot = c.pairs
        out = phonemize_corpus(c, src_b, tgt_b, workers=2)
        assert c.pairs == snapshot
        assert [p.origin_line for p in out] == [1, 3]
        assert [n for n, _ in out.failures] == [2]
        assert out.dropped["g2p_failure"] == 1

    def test_rejects_phonemic_input(self, data_dir):
        with pytest.raises(CorpusError):
            phonemize_corpus(corpus_of([("a", "b")], Representation.PHONEMIC), *backends(data_dir))


class TestSplit:
    ten = corpus_of([(f"s{i}", f"t{i}") for i in range(10)])

    def test_partition_law(self):
        train, valid = split_corpus(self.ten, 0.8, seed=7)
        assert (len(train), len(valid)) == (8, 2)
        assert set(train.pairs).isdisjoint(valid.pairs)
        assert set(train.pairs) | set(valid.pairs) == set(self.ten.pairs)

    def test_deterministic(self):
        assert split_corpus(self.ten, 0.8, 7) == split_corpus(self.ten, 0.8, 7)

    def test_seed_matters(self):
        splits = {tuple(p.origin_line for p in split_corpus(self.ten, 0.5, s)[1]) for s in range(10)}
        assert len(splits) > 1

    def test_parts_keep_input_order(self):
        for part in split_corpus(self.ten, 0.6, 3):
            lines_ = [p.origin_line for p in part]
            assert lines_ == sorted(lines_)

    def test_too_small(self):
        with pytest.raises(TooSmallError):
            split_corpus(corpus_of([("a", "b"), ("c", "d")]), 0.99, 1)
        with pytest.raises(TooSmallError):
            split_corpus(corpus_of([("a", "b")]), 0.5, 1)

    @given(st.integers(2, 60), st.floats(0.01, 0.99), st.integers(0, 2**31))
    def test_sizes_are_ceiling(self, n, f, seed):
        import math

        c = corpus_of([(f"s{i}", "t") for i in range(n)])
        k = math.ceil(f * n)
        if k in (0, n):
            with pytest.raises(TooSmallError):
                split_corpus(c, f, seed)
            return
        train, valid = split_corpus(c, f, seed)
        assert (len(train), len(valid)) == (k, n - k)
        assert sorted(train.pairs + valid.pairs, key=lambda p: p.origin_line) == list(c.pairs)


class TestFilter:
    def test_unbalanced_pair_dropped(self):
        c = corpus_of([("a", " ".join(["b"] * 100))])
        out = filter_pairs(c, max_len=200, ratio_cap=9)
        assert len(out) == 0 and out.dropped["ratio"] == 1

    def test_all_within_limits_unchanged(self):
        c = corpus_of([("a b", "c d e"), ("a", "b")])
        assert filter_pairs(c, 10, 9).pairs == c.pairs

    def test_mixed_corpus_against_enumeration(self):
        rows = [
            ("a " * 3, "b " * 4),
            ("a " * 11, "b " * 5),
            ("a", "b " * 10),
            ("a " * 10, "b " * 10),
            ("a " * 2, "b " * 9),
        ]
        c = corpus_of([(s.strip(), t.strip()) for s, t in rows])
        # lengths (3,4) keep; (11,5) too long; (1,10) ratio 10; (10,10) keep; (2,9) ratio 4.5 keep
        out = filter_pairs(c, max_len=10, ratio_cap=9)
        assert [p.origin_line for p in out] == [1, 4, 5]
        assert out.dropped == {"too_long": 1, "ratio": 1}

    @given(st.lists(st.tuples(st.integers(1, 15), st.integers(1, 15)), max_size=12), st.integers(1, 12),
           st.floats(1, 6))
    def test_brute_force_oracle(self, lengths, max_len, cap):
        c = corpus_of([("w " * a, "v " * b) for a, b in lengths])
        expected = [
            i for i, (a, b) in enumerate(lengths, start=1)
            if a <= max_len and b <= max_len and max(a, b) <= cap * min(a, b)
        ]
        assert [p.origin_line for p in filter_pairs(c, max_len, cap)] == expected


class TestStats:
    def test_golden_pair(self):
        s = corpus_stats(corpus_of([(GOLDEN_SOURCE, GOLDEN_TARGET)]))
        assert s.pair_count == 1
        assert s.source_tokens == 7
        assert s.target_tokens == 7

    def test_empty(self):
        s = corpus_stats(ParallelCorpus())
        assert s == CorpusStats()
        assert s.distinct_source_symbols == 0

    def test_recomputation_identical(self):
        c = corpus_of([("a b", "c"), ("d e f", "g h")])
        assert corpus_stats(c) == corpus_stats(c)

    def test_kv_lines(self):
        kv = corpus_stats(corpus_of([("a b", "c")])).to_kv()
        assert "pairs=1\n" in kv and "source_tokens=2\n" in kv and "source_len_0=1\n" in kv

    @given(
        st.lists(st.tuples(st.text("ab c.", min_size=1), st.text("xy z", min_size=1)), max_size=6),
        st.lists(st.tuples(st.text("ab c.", min_size=1), st.text("xy z", min_size=1)), max_size=6),
    )
    def test_additive_under_concatenation(self, rows_a, rows_b):
        def mk(rows):
            return corpus_of([(s, t) for s, t in rows if s.strip() and t.strip()])

        a, b = mk(rows_a), mk(rows_b)
        assert corpus_stats(a + b) == corpus_stats(a) + corpus_stats(b)


def test_strip_corpus_punctuation_drops_emptied_pairs():
    c = corpus_of([("a, b.", "c!"), ("...", "d")])
    out = strip_corpus_punctuation(c)
    assert out.pairs == (ParallelPair("a b", "c", 1),)
    assert out.dropped == {"emptied_by_punctuation": 1}


def test_pair_rejects_empty_side():
    with pytest.raises(ValueError):
        ParallelPair(" ", "x", 1)
