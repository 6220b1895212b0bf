"""Phonemize sentences with the bundled lexicon-and-rules backends, with a disk cache."""

from __future__ import annotations

import tempfile
from pathlib import Path

from phonemt.g2p import BackendKind, G2pBackendSpec, StreamSummary, phonemize_line, phonemize_stream
from phonemt.toy import data_dir


def backend(lang: str, cache_dir: Path | None = None) -> G2pBackendSpec:
    data = data_dir()
    return G2pBackendSpec(
        BackendKind.LEXICON_RULES,
        lang,
        data / "lexicons" / f"{lang}.tsv",
        data / "rules" / f"{lang}.tsv",
        cache_dir=cache_dir,
    )


def main() -> None:
    print(phonemize_line("Registration for the event can be submitted.", backend("en")))
    print(phonemize_line("Die Anmeldung zur Veranstaltung kann vorgenommen werden.", backend("de")))

    # Words missing from the lexicon fall back to longest-match letter rules.
    print("nichtig ->", phonemize_line("nichtig", backend("de")))

    lines = ["the event can be submitted", "registration for the event"] * 50
    with tempfile.TemporaryDirectory() as tmp:
        spec = backend("en", Path(tmp))
        for attempt in ("cold", "warm"):
            summary = StreamSummary()
            list(phonemize_stream(lines, spec, workers=2, summary=summary))
            print(f"{attempt} cache: {summary}")
        print("cache files:", sorted(p.name for p in Path(tmp).iterdir()))


if __name__ == "__main__":
    main()
