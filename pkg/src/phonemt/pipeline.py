"""The two-branch experiment: text-level reference model vs phoneme-level model.

Output directory layout::

    data/text.{src,tgt}              graphemic corpus (punctuation handled per config)
    data/phoneme.{src,tgt}           phonemized twin, line-aligned with data/text.*
    data/phonemize.report            key=value drop report
    data/<branch>/{train,valid}.{src,tgt}
    models/<branch>/vocab.{src,tgt}.json, model.ckpt, train.log
    hyp/<branch>.<split>.hyp         decoded outputs
    reports/<branch>.<split>.{txt,kv}
    reports/compare.{txt,kv}
    stamps/                          input digests used to skip finished stages
    manifest.txt

``branch`` is ``reference`` (graphemic) or ``phoneme``.
"""

from __future__ import annotations

import hashlib
import logging
import platform
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import torch

from . import __version__
from .bleu import (
    BleuReport,
    EvalConfig,
    EvalMode,
    ReverseLexicon,
    compare_report,
    corpus_bleu,
)
from .config import BRANCHES, PipelineConfig
from .corpus import (
    CorpusError,
    ParallelCorpus,
    Representation,
    align_by_origin,
    corpus_stats,
    filter_pairs,
    load_parallel,
    phonemize_corpus,
    split_corpus,
    strip_corpus_punctuation,
    write_corpus,
)
from .g2p import Phonemizer, backend_fingerprint, load_lexicon
from .seq2seq import (
    Vocabulary,
    beam_decode,
    build_vocab,
    greedy_decode_batch,
    load_checkpoint,
    train,
)

log = logging.getLogger(__name__)

STAGES = ("phonemize", "prepare", "vocab", "train", "translate", "score", "compare")
SPLITS = ("train", "valid")


class StageError(RuntimeError):
    def __init__(self, stage: str, error: BaseException):
        super().__init__(f"[{stage}] {type(error).__name__}: {error}")
        self.stage = stage
        self.error = error


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _digest(*parts: object) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, Path):
            h.update(_sha256_file(part).encode())
        else:
            h.update(repr(part).encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()


class Pipeline:
    def __init__(self, config: PipelineConfig, workers: int | None = None, force: bool = False):
        self.config = config
        self.out = config.output_dir
        self.workers = workers or config["run"]["workers"]
        self.force = force
        self.skipped: list[str] = []

    # -- paths ---------------------------------------------------------------
    def data(self, *parts: str) -> Path:
        return self.out.joinpath("data", *parts)

    def model_dir(self, branch: str) -> Path:
        return self.out / "models" / branch

    def hyp_path(self, branch: str, split: str) -> Path:
        return self.out / "hyp" / f"{branch}.{split}.hyp"

    def report_path(self, branch: str, split: str, ext: str) -> Path:
        return self.out / "reports" / f"{branch}.{split}.{ext}"

    def _fresh(self, name: str, key: str, outputs: Iterable[Path]) -> bool:
        stamp = self.out / "stamps" / name
        if self.force or not stamp.exists() or not all(p.exists() for p in outputs):
            return False
        return stamp.read_text(encoding="utf-8").strip() == key

    def _stamp(self, name: str, key: str) -> None:
        stamp = self.out / "stamps" / name
        stamp.parent.mkdir(parents=True, exist_ok=True)
        stamp.write_text(key + "\n", encoding="utf-8")

    def _run(self, name: str, key: str, outputs: list[Path], body: Callable[[], None]) -> None:
        if self._fresh(name, key, outputs):
            log.info("%s: up to date", name)
            self.skipped.append(name)
            return
        log.info("%s: running", name)
        try:
            body()
        except Exception as exc:
            raise StageError(name.split(".")[0], exc) from exc
        self._stamp(name, key)

    # -- stages ----------------------------------------------------------------
    def phonemize(self) -> None:
        cfg = self.config
        src, tgt = cfg["data"]["source"], cfg["data"]["target"]
        specs = [cfg.g2p_spec("source"), cfg.g2p_spec("target")]
        fingerprints = [backend_fingerprint(s)[0] for s in specs]
        key = _digest(src, tgt, cfg["data"], fingerprints)
        outputs = [self.data(f"{b}.{s}") for b in ("text", "phoneme") for s in ("src", "tgt")]

        def body():
            corpus = load_parallel(src, tgt, cfg["data"]["source_lang"], cfg["data"]["target_lang"])
            if cfg["data"]["strip_punctuation"]:
                corpus = strip_corpus_punctuation(corpus)
            with Phonemizer(specs[0]) as sp, Phonemizer(specs[1]) as tp:
                phon = phonemize_corpus(corpus, sp, tp, workers=self.workers)
                calls = sp.backend_calls + tp.backend_calls
                hits = sp.cache_hits + tp.cache_hits
            text, phon = align_by_origin(corpus, phon)
            if len(text) == 0:
                first = phon.failures[0][1] if phon.failures else "empty input"
                raise CorpusError(f"no pair survived phonemization ({first})")
            write_corpus(text, self.data("text.src"), self.data("text.tgt"))
            write_corpus(phon, self.data("phoneme.src"), self.data("phoneme.tgt"))
            lines = [
                ("input_pairs", len(corpus)),
                ("kept_pairs", len(text)),
                ("g2p_failures", len(phon.failures)),
                ("backend_calls", calls),
                ("cache_hits", hits),
            ] + [(f"failure.{n}", msg) for n, msg in phon.failures]
            self.data("phonemize.report").write_text("".join(f"{k}={v}\n" for k, v in lines), encoding="utf-8")
            self.data("text.stats").write_text(corpus_stats(text).to_kv(), encoding="utf-8")
            self.data("phoneme.stats").write_text(corpus_stats(phon).to_kv(), encoding="utf-8")
            log.info("phonemize: %d pairs, %d backend calls, %d cache hits", len(text), calls, hits)

        self._run("phonemize", key, outputs, body)

    def _load_branch_data(self, branch: str) -> ParallelCorpus:
        stem = "text" if branch == "reference" else "phoneme"
        rep = Representation.GRAPHEMIC if branch == "reference" else Representation.PHONEMIC
        return load_parallel(self.data(f"{stem}.src"), self.data(f"{stem}.tgt"), representation=rep)

    def prepare(self) -> None:
        cfg = self.config["data"]
        inputs = [self.data(f"{b}.{s}") for b in ("text", "phoneme") for s in ("src", "tgt")]
        key = _digest(*inputs, cfg["train_fraction"], cfg["max_tokens"], cfg["ratio_cap"], self.config.seed)
        outputs = [self.data(b, f"{sp}.{s}") for b in BRANCHES for sp in SPLITS for s in ("src", "tgt")]

        def body():
            text, phon = (self._load_branch_data(b) for b in BRANCHES)
            text = filter_pairs(text, cfg["max_tokens"], cfg["ratio_cap"])
            phon = filter_pairs(phon, cfg["max_tokens"], cfg["ratio_cap"])
            text, phon = align_by_origin(text, phon)
            for branch, corpus in zip(BRANCHES, (text, phon)):
                tr, va = split_corpus(corpus, cfg["train_fraction"], self.config.seed)
                write_corpus(tr, self.data(branch, "train.src"), self.data(branch, "train.tgt"))
                write_corpus(va, self.data(branch, "valid.src"), self.data(branch, "valid.tgt"))

        self._run("prepare", key, outputs, body)

    def vocab(self) -> None:
        for branch in BRANCHES:
            _, _, mode, min_count = self.config.branch_settings(branch)
            inputs = [self.data(branch, f"train.{s}") for s in ("src", "tgt")]
            outputs = [self.model_dir(branch) / f"vocab.{s}.json" for s in ("src", "tgt")]

            def body(branch=branch, mode=mode, min_count=min_count, outputs=outputs):
                corpus = load_parallel(*(self.data(branch, f"train.{s}") for s in ("src", "tgt")))
                sv, tv = build_vocab(corpus, mode, min_count)
                outputs[0].parent.mkdir(parents=True, exist_ok=True)
                outputs[0].write_text(sv.to_json() + "\n", encoding="utf-8")
                outputs[1].write_text(tv.to_json() + "\n", encoding="utf-8")

            self._run(f"vocab.{branch}", _digest(*inputs, mode, min_count), outputs, body)

    def _vocabs(self, branch: str) -> tuple[Vocabulary, Vocabulary]:
        d = self.model_dir(branch)
        return tuple(Vocabulary.from_json((d / f"vocab.{s}.json").read_text(encoding="utf-8")) for s in ("src", "tgt"))  # type: ignore[return-value]

    def _pairs(self, branch: str, split: str) -> list[tuple[str, str]]:
        corpus = load_parallel(*(self.data(branch, f"{split}.{s}") for s in ("src", "tgt")))
        return list(zip(corpus.sources, corpus.targets))

    def train(self, branches: Iterable[str] = BRANCHES) -> None:
        for branch in branches:
            mc, tc, _, _ = self.config.branch_settings(branch)
            d = self.model_dir(branch)
            inputs = [self.data(branch, f"{sp}.{s}") for sp in SPLITS for s in ("src", "tgt")]
            inputs += [d / "vocab.src.json", d / "vocab.tgt.json"]
            outputs = [d / "model.ckpt", d / "train.log"]

            def body(branch=branch, mc=mc, tc=tc, d=d):
                sv, tv = self._vocabs(branch)
                (d / "train.log").unlink(missing_ok=True)
                train(
                    self._pairs(branch, "train"), self._pairs(branch, "valid"), sv, tv, mc, tc,
                    log_path=d / "train.log", checkpoint_path=d / "model.ckpt",
                )

            self._run(f"train.{branch}", _digest(*inputs, mc, tc), outputs, body)

    def translate(self, branches: Iterable[str] = BRANCHES) -> None:
        dec = self.config["decode"]
        for branch in branches:
            ckpt = self.model_dir(branch) / "model.ckpt"
            inputs = [ckpt] + [self.data(branch, f"{sp}.src") for sp in SPLITS]
            outputs = [self.hyp_path(branch, sp) for sp in SPLITS]

            def body(branch=branch, ckpt=ckpt):
                cp = load_checkpoint(ckpt)
                for split in SPLITS:
                    sources = [s for s, _ in self._pairs(branch, split)]
                    if dec["beam_width"] > 1:
                        hyps = [
                            beam_decode(cp.model, s, cp.source_vocab, cp.target_vocab,
                                        dec["beam_width"], dec["max_len"], dec["length_penalty"])[0].text
                            for s in sources
                        ]
                    else:
                        hyps = []
                        for i in range(0, len(sources), 64):
                            hyps += [h.text for h in greedy_decode_batch(
                                cp.model, sources[i : i + 64], cp.source_vocab, cp.target_vocab, dec["max_len"])]
                    path = self.hyp_path(branch, split)
                    path.parent.mkdir(parents=True, exist_ok=True)
                    path.write_text("".join(h + "\n" for h in hyps), encoding="utf-8")

            self._run(f"translate.{branch}", _digest(*inputs, dec), outputs, body)

    def eval_config(self, branch: str) -> EvalConfig:
        ev = self.config["eval"]
        common = dict(max_n=ev["max_n"], smoothing=ev["smoothing"], policy=self.config.policy())
        if branch == "reference":
            return EvalConfig(EvalMode.GRAPHEMIC, **common)
        mode = EvalMode(ev["phoneme_mode"])
        if mode is EvalMode.PHONEME_NORMALIZED:
            return EvalConfig(mode, **common)
        lex_path = ev["reverse_lexicon"] or self.config["g2p.target"]["lexicon"]
        reverse = ReverseLexicon.from_lexicon(load_lexicon(lex_path), self.config.policy())
        return EvalConfig(mode, reverse_lexicon=reverse, sentence_case=ev["sentence_case"], **common)

    def _references(self, branch: str, split: str) -> list[str]:
        # back-converted phoneme output is scored against the graphemic references
        if branch == "phoneme" and self.config["eval"]["phoneme_mode"] == EvalMode.BACK_CONVERTED.value:
            branch = "reference"
        return [t for _, t in self._pairs(branch, split)]

    def score(self, branches: Iterable[str] = BRANCHES) -> dict[tuple[str, str], BleuReport]:
        reports = {}
        for branch in branches:
            cfg = self.eval_config(branch)
            for split in SPLITS:
                hyps = self.hyp_path(branch, split).read_text(encoding="utf-8").split("\n")[:-1]
                rep = corpus_bleu(hyps, self._references(branch, split), cfg)
                reports[(branch, split)] = rep
                self.report_path(branch, split, "txt").parent.mkdir(parents=True, exist_ok=True)
                self.report_path(branch, split, "txt").write_text(rep.to_text(), encoding="utf-8")
                self.report_path(branch, split, "kv").write_text(rep.to_kv(), encoding="utf-8")
        return reports

    def compare(self) -> str:
        self.config.check_matched()
        self.phonemize()
        self.prepare()
        self.vocab()
        self.train()
        self.translate()
        reports = self.score()
        text_parts, kv_parts = [], []
        for split in ("valid", "train"):
            cmp = compare_report(reports[("reference", split)], reports[("phoneme", split)])
            text_parts.append(f"== {split} ==\n{cmp.to_text()}")
            kv_parts.append("".join(f"{split}.{line}\n" for line in cmp.to_kv().splitlines()))
        text = "\n".join(text_parts)
        (self.out / "reports" / "compare.txt").write_text(text, encoding="utf-8")
        (self.out / "reports" / "compare.kv").write_text("".join(kv_parts), encoding="utf-8")
        self.write_manifest()
        return text

    def write_manifest(self) -> Path:
        cfg = self.config
        rows: dict[str, str] = {
            "tool_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "torch": torch.__version__,
            "config_path": str(cfg.path),
            "config_sha256": cfg.digest(),
            "seed": str(cfg.seed),
        }
        for side in ("source", "target"):
            fp, meta = backend_fingerprint(cfg.g2p_spec(side))
            rows[f"g2p.{side}.fingerprint"] = fp
            rows.update({f"g2p.{side}.{k}": v for k, v in meta.items()})
        for path in sorted(self.out.rglob("*")):
            if path.is_file() and path.name != "manifest.txt" and "stamps" not in path.parts:
                rows[f"artifact.{path.relative_to(self.out).as_posix()}"] = _sha256_file(path)
        out = self.out / "manifest.txt"
        out.write_text("".join(f"{k}={rows[k]}\n" for k in sorted(rows)), encoding="utf-8")
        return out
