"""Corpus BLEU in its three scoring modes, plus a side-by-side comparison."""

from __future__ import annotations

from phonemt.bleu import EvalConfig, EvalMode, ReverseLexicon, compare_report, corpus_bleu, modified_precision
from phonemt.g2p import load_lexicon
from phonemt.toy import data_dir


def main() -> None:
    m, t = modified_precision([["the"] * 7], ["the cat is on the mat".split()], 1)
    print(f"clipped unigram precision: {m}/{t}")

    refs = ["the cat is on the mat", "there is a cat on the mat"]
    hyps = ["the cat is on the mat", "a cat is on the mat"]
    text = corpus_bleu(hyps, refs)
    print("graphemic:", text.to_text(), end="")

    phon_refs = ["'ɪç h,abə 'aɪnə k'atsə", "d'iː k,atsə"]
    phon_hyps = ["ɪç h'abə aɪnə katsə", "diː k'atsə"]
    normalized = corpus_bleu(phon_hyps, phon_refs, EvalConfig(mode=EvalMode.PHONEME_NORMALIZED))
    print("phoneme-normalized (stress ignored):", normalized.to_text(), end="")

    lexicon = load_lexicon(data_dir() / "lexicons" / "de.tsv", "de")
    config = EvalConfig(
        mode=EvalMode.BACK_CONVERTED, reverse_lexicon=ReverseLexicon.from_lexicon(lexicon), sentence_case=True
    )
    hyp = "di: 'anm,ɛldɔŋ tsu:r fər'anʃt,altɔŋ k,an f'o:rgən,əmən v,ɛrdən"
    ref = "Die Anmeldung zur Veranstaltung kann vorgenommen werden."
    back = corpus_bleu([hyp], [ref], config)
    print("back-converted:", back.to_text(), end="")

    graph = corpus_bleu(["Die Anmeldung zur Veranstaltung kann werden."], [ref])
    print(compare_report(graph, back).to_text(), end="")


if __name__ == "__main__":
    main()
