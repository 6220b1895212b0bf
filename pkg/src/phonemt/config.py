"""Experiment configuration files.

The format is INI (``configparser``) with a fixed, typed schema: every option
has a type (int, float, bool, str, path or a choice) and either a default or
is required.  Relative paths are resolved against the config file's
directory, except the output and cache directories, which resolve against
the working directory.  See ``phonemt/data/toy.ini`` for a complete, commented example.

Validation collects every problem before failing, so one run reports all
missing paths and bad values at once.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from .bleu import EvalMode, Smoothing
from .g2p import CACHE_ENV, PHONEMIZER_ENV, BackendKind, G2pBackendSpec
from .phonemes import NormalizationPolicy
from .seq2seq import ModelConfig, TrainConfig, VocabMode

REQUIRED = object()
DEFAULT_SEED = 1
BRANCHES = ("reference", "phoneme")


class ConfigError(Exception):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class ConfigParseError(ConfigError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__([f"line {line}, column {column}: {message}"])
        self.line = line
        self.column = column


class MatchedRunError(ConfigError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


@dataclass(frozen=True)
class Option:
    type: Callable[[str], Any]
    default: Any = REQUIRED
    is_path: bool = False
    must_exist: bool = False
    # outputs resolve against the working directory, inputs against the config file
    from_cwd: bool = False


def _path(must_exist: bool = False, default: Any = REQUIRED, from_cwd: bool = False) -> Option:
    return Option(str, default, is_path=True, must_exist=must_exist, from_cwd=from_cwd)


_G2P = {
    "kind": Option(_choice(*(k.value for k in BackendKind))),
    "language": Option(str),
    "lexicon": _path(must_exist=True, default=None),
    "rules": _path(must_exist=True, default=None),
    "command": Option(str, None),
    "persistent": Option(_bool, False),
    "strict": Option(_bool, True),
}
_MODEL = {
    "layers": Option(int, 2),
    "model_dim": Option(int, 128),
    "heads": Option(int, 4),
    "feedforward_dim": Option(int, 512),
    "max_sequence_length": Option(int, 256),
    "dropout_rate": Option(float, 0.1),
}
_TRAINING = {
    "steps": Option(int, 2000),
    "batch_size": Option(int, 32),
    "learning_rate": Option(float, 1e-3),
    "warmup_steps": Option(int, 200),
    "beta1": Option(float, 0.9),
    "beta2": Option(float, 0.98),
    "eps": Option(float, 1e-9),
    "clip_norm": Option(float, 1.0),
    "label_smoothing": Option(float, 0.0),
    "eval_every": Option(int, 100),
    "checkpoint_every": Option(int, 0),
    "vocab_mode": Option(_choice(*(m.value for m in VocabMode)), "character"),
    "min_count": Option(int, 1),
}

SCHEMA: dict[str, dict[str, Option]] = {
    "run": {
        "seed": Option(int, DEFAULT_SEED),
        "workers": Option(int, 1),
        "output_dir": _path(from_cwd=True),
    },
    "data": {
        "source": _path(must_exist=True),
        "target": _path(must_exist=True),
        "source_lang": Option(str, "en"),
        "target_lang": Option(str, "de"),
        "strip_punctuation": Option(_bool, True),
        "train_fraction": Option(float, 0.8),
        "max_tokens": Option(int, 100),
        "ratio_cap": Option(float, 9.0),
    },
    "cache": {"dir": _path(default=None, from_cwd=True)},
    "g2p.source": _G2P,
    "g2p.target": _G2P,
    "normalization": {
        "strip_primary_stress": Option(_bool, True),
        "strip_secondary_stress": Option(_bool, True),
        "canonicalize_length": Option(_bool, True),
        "strip_punctuation": Option(_bool, True),
        "variant_classes": Option(str, ""),
    },
    "model": _MODEL,
    "training": _TRAINING,
    "decode": {
        "max_len": Option(int, 200),
        "beam_width": Option(int, 1),
        "length_penalty": Option(float, 0.0),
    },
    "eval": {
        "max_n": Option(int, 4),
        "smoothing": Option(_choice(*(s.value for s in Smoothing)), "none"),
        "phoneme_mode": Option(_choice(EvalMode.BACK_CONVERTED.value, EvalMode.PHONEME_NORMALIZED.value), "back_converted"),
        "sentence_case": Option(_bool, True),
        "reverse_lexicon": _path(must_exist=True, default=None),
    },
}
# Per-branch overrides exist so that a mismatched setup can be expressed and refused.
_BRANCH = {"seed": Option(int, None), **{k: Option(v.type, None) for k, v in {**_MODEL, **_TRAINING}.items()}}
for _b in BRANCHES:
    SCHEMA[f"branch.{_b}"] = _BRANCH

# options whose absence is expected and not worth a warning
_QUIET = {("cache", "dir"), ("eval", "reverse_lexicon"), ("g2p.source", "command"), ("g2p.target", "command"),
          ("g2p.source", "rules"), ("g2p.target", "rules")}


@dataclass
class PipelineConfig:
    path: Path
    values: dict[str, dict[str, Any]]
    warnings: list[str] = field(default_factory=list)
    text: str = ""

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def output_dir(self) -> Path:
        return Path(self.values["run"]["output_dir"])

    @property
    def cache_dir(self) -> Path | None:
        env = os.environ.get(CACHE_ENV)
        if env:
            return Path(env)
        d = self.values["cache"]["dir"]
        return Path(d) if d else None

    def g2p_spec(self, side: str) -> G2pBackendSpec:
        sec = self.values[f"g2p.{side}"]
        kind = BackendKind(sec["kind"])
        command = None
        if kind is BackendKind.EXTERNAL_COMMAND:
            import shlex

            command = tuple(shlex.split(os.environ.get(PHONEMIZER_ENV) or sec["command"]))
        return G2pBackendSpec(
            kind,
            sec["language"],
            lexicon_path=sec["lexicon"],
            rules_path=sec["rules"],
            command=command,
            persistent=sec["persistent"],
            cache_dir=self.cache_dir,
            strict=sec["strict"],
        )

    def policy(self) -> NormalizationPolicy:
        sec = self.values["normalization"]
        classes = [frozenset(group.split()) for group in sec["variant_classes"].split(";") if group.strip()]
        return NormalizationPolicy(
            sec["strip_primary_stress"],
            sec["strip_secondary_stress"],
            sec["canonicalize_length"],
            sec["strip_punctuation"],
            frozenset(classes),
        )

    def branch_settings(self, branch: str) -> tuple[ModelConfig, TrainConfig, str, int]:
        """Model config, training config, vocab mode and min_count for one branch."""
        over = {k: v for k, v in self.values[f"branch.{branch}"].items() if v is not None}
        seed = over.pop("seed", self.seed)
        model = {k: over.get(k, self.values["model"][k]) for k in _MODEL}
        training = {k: over.get(k, self.values["training"][k]) for k in _TRAINING}
        vocab_mode = training.pop("vocab_mode")
        min_count = training.pop("min_count")
        return ModelConfig(seed=seed, **model), TrainConfig(**training), vocab_mode, min_count

    def check_matched(self) -> None:
        """Refuse configurations where the two branches would not be trained identically."""
        ref, phon = (self.branch_settings(b) for b in BRANCHES)
        if ref != phon:
            diffs = [
                name for name, a, b in zip(("model", "training", "vocab_mode", "min_count"), ref, phon) if a != b
            ]
            raise MatchedRunError(
                [f"reference and phoneme branches differ in {', '.join(diffs)}; both must share one config and seed"]
            )

    def digest(self) -> str:
        blob = repr(sorted((s, sorted(v.items())) for s, v in self.values.items()))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _parse_text(text: str, source: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None, strict=True)
    parser.optionxform = str  # type: ignore[assignment]
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError("option outside of any [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigParseError(f"cannot parse {line!r}", lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigParseError(str(exc.message).split(": ", 1)[-1], exc.lineno or 0) from None
    return parser


def validate_config(
    path: str | os.PathLike, overrides: Iterable[str] = (), check_paths: bool = True
) -> PipelineConfig:
    """Parse and type-check a config file; raise :class:`ConfigError` listing every problem.

    ``overrides`` are ``section.key=value`` strings applied before validation
    (the section may itself contain dots, e.g. ``g2p.source.kind=...``).
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    parser = _parse_text(text, str(path))
    errors: list[str] = []
    for item in overrides:
        if "=" not in item:
            errors.append(f"override {item!r}: expected section.key=value")
            continue
        dotted, value = item.split("=", 1)
        if "." not in dotted:
            errors.append(f"override {item!r}: expected section.key=value")
            continue
        section, key = dotted.rsplit(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)

    base = path.parent
    values: dict[str, dict[str, Any]] = {}
    warnings: list[str] = []
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"[{section}]: unknown section")
        else:
            for key in parser[section]:
                if key not in SCHEMA[section]:
                    errors.append(f"{section}.{key}: unknown option")

    for section, options in SCHEMA.items():
        values[section] = {}
        present = parser[section] if parser.has_section(section) else {}
        kinds_section = section.startswith("g2p.")
        for key, opt in options.items():
            name = f"{section}.{key}"
            if key in present and present[key].strip() == "" and opt.default == "":
                values[section][key] = ""
            elif key in present and present[key].strip() != "":
                raw = present[key].strip()
                try:
                    value = opt.type(raw)
                except ValueError as exc:
                    errors.append(f"{name}: {exc}")
                    continue
                if opt.is_path:
                    p = Path(os.path.expanduser(value))
                    value = p if p.is_absolute() else ((Path.cwd() if opt.from_cwd else base) / p)
                    if opt.must_exist and check_paths and not value.exists():
                        errors.append(f"{name}: path does not exist: {value}")
                values[section][key] = value
            elif opt.default is REQUIRED:
                if section.startswith("g2p.") and not parser.has_section(section):
                    errors.append(f"{name}: required option missing (section [{section}] absent)")
                else:
                    errors.append(f"{name}: required option missing")
            else:
                values[section][key] = opt.default
                quiet = (section, key) in _QUIET or section.startswith("branch.")
                if not quiet and not kinds_section:
                    warnings.append(f"{name} not set; using default {opt.default!r}")
                elif kinds_section and key in ("persistent", "strict"):
                    warnings.append(f"{name} not set; using default {opt.default!r}")

    for side in ("source", "target"):
        sec = values.get(f"g2p.{side}", {})
        kind = sec.get("kind")
        if kind == BackendKind.LEXICON_RULES.value and sec.get("lexicon") is None:
            if f"g2p.{side}.lexicon: path does not exist" not in " ".join(errors):
                errors.append(f"g2p.{side}.lexicon: required for kind=lexicon_rules")
        if kind == BackendKind.EXTERNAL_COMMAND.value and not (sec.get("command") or os.environ.get(PHONEMIZER_ENV)):
            errors.append(f"g2p.{side}.command: required for kind=external_command")

    if not errors:
        try:
            cfg = PipelineConfig(path, values, warnings, text)
            for b in BRANCHES:
                cfg.branch_settings(b)
            cfg.policy()
        except ValueError as exc:
            errors.append(str(exc))
    if values.get("eval", {}).get("phoneme_mode") == EvalMode.BACK_CONVERTED.value:
        if values["eval"].get("reverse_lexicon") is None and values.get("g2p.target", {}).get("lexicon") is None:
            errors.append("eval.reverse_lexicon: required for phoneme_mode=back_converted without a target lexicon")
    if errors:
        raise ConfigError(errors)
    return PipelineConfig(path, values, warnings, text)
