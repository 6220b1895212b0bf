"""Command-line entry point.

    phonemt <subcommand> --config PATH [--set section.key=value ...] [--seed N] [--workers N]

Subcommands: phonemize, prepare, vocab, train, translate, score, compare,
validate.  Progress goes to standard error; results go to files under
``run.output_dir``.  Exit status is 0 only if every requested artifact was
produced.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import BRANCHES, ConfigError, validate_config
from .pipeline import STAGES, Pipeline, StageError

log = logging.getLogger("phonemt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phonemt", description="Text vs phoneme translation experiment")
    parser.add_argument("subcommand", choices=STAGES + ("validate",))
    parser.add_argument("--config", required=True, help="experiment config (INI)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    parser.add_argument("--seed", type=int, help="shorthand for --set run.seed=N")
    parser.add_argument("--workers", type=int, help="phonemizer worker count")
    parser.add_argument("--branch", choices=BRANCHES, help="limit train/translate/score to one branch")
    parser.add_argument("--force", action="store_true", help="rerun stages even if up to date")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run_subcommand(name: str, config_path: str, overrides: list[str] = (), workers: int | None = None,
                   branch: str | None = None, force: bool = False) -> int:
    try:
        config = validate_config(config_path, overrides)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for warning in config.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if name == "validate":
        print(f"{config_path}: ok", file=sys.stderr)
        return 0

    pipe = Pipeline(config, workers=workers, force=force)
    branches = [branch] if branch else list(BRANCHES)
    try:
        if name == "phonemize":
            pipe.phonemize()
        elif name == "prepare":
            pipe.prepare()
        elif name == "vocab":
            pipe.vocab()
        elif name == "train":
            if branch is None:
                config.check_matched()
            pipe.train(branches)
        elif name == "translate":
            pipe.translate(branches)
        elif name == "score":
            for (b, split), rep in pipe.score(branches).items():
                print(f"{b}.{split}: {rep.to_text()}", end="", file=sys.stderr)
        elif name == "compare":
            print(pipe.compare(), end="", file=sys.stderr)
        if name != "compare":
            pipe.write_manifest()
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: [{name}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    return run_subcommand(args.subcommand, args.config, overrides, args.workers, args.branch, args.force)


if __name__ == "__main__":
    sys.exit(main())
