"""Training loop: Adam with linear warmup then inverse-square-root decay."""

from __future__ import annotations

import logging
import math
import os
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .model import ModelConfig, Seq2SeqTransformer, sequence_loss
from .vocab import PAD, Vocabulary

log = logging.getLogger(__name__)


class DivergenceDetected(RuntimeError):
    def __init__(self, step: int, last_checkpoint: Path | None):
        super().__init__(f"non-finite loss at step {step}; last good checkpoint: {last_checkpoint}")
        self.step = step
        self.last_checkpoint = last_checkpoint


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 32
    learning_rate: float = 1e-3  # peak, reached at the end of warmup
    warmup_steps: int = 200
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    clip_norm: float = 1.0
    label_smoothing: float = 0.0
    eval_every: int = 100
    checkpoint_every: int = 0  # 0 = only at the end

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.batch_size < 1 or self.warmup_steps < 0 or self.learning_rate <= 0:
            raise ValueError("invalid optimizer settings")

    def to_dict(self) -> dict:
        return asdict(self)

    def lr_at(self, step: int) -> float:
        """Learning rate for 1-based ``step``."""
        if self.warmup_steps == 0:
            return self.learning_rate
        return self.learning_rate * min(step / self.warmup_steps, math.sqrt(self.warmup_steps / step))


@dataclass
class TrainingState:
    step: int = 0
    epoch_order: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cursor: int = 0
    rng_state: dict = field(default_factory=dict)
    torch_rng: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class TrainResult:
    model: Seq2SeqTransformer
    state: TrainingState
    log: list[tuple[int, float, float]]


@contextmanager
def deterministic():
    previous = torch.are_deterministic_algorithms_enabled()
    torch.use_deterministic_algorithms(True)
    try:
        yield
    finally:
        torch.use_deterministic_algorithms(previous)


def encode_pairs(
    pairs: Sequence[tuple[str, str]], source_vocab: Vocabulary, target_vocab: Vocabulary, max_len: int
) -> list[tuple[list[int], list[int]]]:
    """Encode pairs, dropping those that do not fit ``max_len`` positions."""
    out = []
    for s, t in pairs:
        src, tgt = source_vocab.encode(s), target_vocab.encode(t)
        if len(src) <= max_len and len(tgt) - 1 <= max_len:
            out.append((src, tgt))
    return out


def collate(batch: Sequence[tuple[list[int], list[int]]]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Pad a batch into (source, decoder input, gold output) tensors."""
    b = len(batch)
    s_len = max(len(s) for s, _ in batch)
    t_len = max(len(t) for _, t in batch) - 1
    src = torch.full((b, s_len), PAD, dtype=torch.long)
    tgt_in = torch.full((b, t_len), PAD, dtype=torch.long)
    tgt_out = torch.full((b, t_len), PAD, dtype=torch.long)
    for i, (s, t) in enumerate(batch):
        src[i, : len(s)] = torch.tensor(s)
        tgt_in[i, : len(t) - 1] = torch.tensor(t[:-1])
        tgt_out[i, : len(t) - 1] = torch.tensor(t[1:])
    return src, tgt_in, tgt_out


@torch.no_grad()
def perplexity(model: Seq2SeqTransformer, data: Sequence[tuple[list[int], list[int]]], batch_size: int = 64) -> float:
    if not data:
        return float("nan")
    was_training = model.training
    model.eval()
    total, count = 0.0, 0
    for i in range(0, len(data), batch_size):
        src, tgt_in, tgt_out = collate(data[i : i + batch_size])
        n = int((tgt_out != PAD).sum())
        total += float(sequence_loss(model(src, tgt_in), tgt_out)) * n
        count += n
    model.train(was_training)
    return math.exp(total / max(count, 1))


def _optimizer_arrays(model: torch.nn.Module, opt: torch.optim.Optimizer) -> dict[str, np.ndarray]:
    arrays = {}
    for name, p in model.named_parameters():
        st = opt.state.get(p)
        if st:
            arrays[f"adam.exp_avg.{name}"] = st["exp_avg"].detach().numpy().copy()
            arrays[f"adam.exp_avg_sq.{name}"] = st["exp_avg_sq"].detach().numpy().copy()
    return arrays


def _restore_optimizer(model: torch.nn.Module, opt: torch.optim.Optimizer, arrays: dict[str, np.ndarray], step: int) -> None:
    for name, p in model.named_parameters():
        key = f"adam.exp_avg.{name}"
        if key in arrays:
            opt.state[p] = {
                "step": torch.tensor(float(step)),
                "exp_avg": torch.from_numpy(arrays[key].copy()),
                "exp_avg_sq": torch.from_numpy(arrays[f"adam.exp_avg_sq.{name}"].copy()),
            }


def train(
    train_pairs: Sequence[tuple[str, str]],
    valid_pairs: Sequence[tuple[str, str]],
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
    model_config: ModelConfig,
    train_config: TrainConfig,
    log_path: str | os.PathLike | None = None,
    checkpoint_path: str | os.PathLike | None = None,
    resume: tuple[Seq2SeqTransformer, TrainingState] | None = None,
) -> TrainResult:
    """Train a model from scratch (or continue ``resume``) for ``train_config.steps`` updates.

    The run is a pure function of the data, vocabularies, both configs and
    ``model_config.seed``.  Log lines are ``step<TAB>train_loss<TAB>valid_ppl``.
    """
    from .checkpoint import save_checkpoint

    data = encode_pairs(train_pairs, source_vocab, target_vocab, model_config.max_sequence_length)
    valid = encode_pairs(valid_pairs, source_vocab, target_vocab, model_config.max_sequence_length)
    if not data:
        raise ValueError("no training pairs fit the model's max_sequence_length")

    with deterministic():
        if resume is None:
            torch.manual_seed(model_config.seed)
            model = Seq2SeqTransformer(model_config, len(source_vocab), len(target_vocab))
            state = TrainingState()
            rng = np.random.default_rng(model_config.seed)
        else:
            model, state = resume
            rng = np.random.default_rng()
            rng.bit_generator.state = state.rng_state
            torch.set_rng_state(torch.from_numpy(state.torch_rng.copy()))
        opt = torch.optim.Adam(
            model.parameters(),
            lr=train_config.lr_at(max(state.step, 1)),
            betas=(train_config.beta1, train_config.beta2),
            eps=train_config.eps,
        )
        if resume is not None:
            _restore_optimizer(model, opt, state.optimizer, state.step)

        log_fh = open(log_path, "a", encoding="utf-8") if log_path else None
        history: list[tuple[int, float, float]] = []
        last_good: Path | None = None
        running, running_n = 0.0, 0
        order, cursor = state.epoch_order, state.cursor
        model.train()
        try:
            for i in range(train_config.steps):
                step = state.step + 1
                batch = []
                while len(batch) < min(train_config.batch_size, len(data)):
                    if cursor >= len(order):
                        order, cursor = rng.permutation(len(data)), 0
                    batch.append(data[int(order[cursor])])
                    cursor += 1
                src, tgt_in, tgt_out = collate(batch)
                for group in opt.param_groups:
                    group["lr"] = train_config.lr_at(step)
                opt.zero_grad(set_to_none=True)
                loss = sequence_loss(model(src, tgt_in), tgt_out, train_config.label_smoothing)
                if not torch.isfinite(loss):
                    raise DivergenceDetected(step, last_good)
                loss.backward()
                if train_config.clip_norm > 0:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), train_config.clip_norm)
                opt.step()
                state.step = step
                running += loss.item()
                running_n += 1

                final = i == train_config.steps - 1
                if step % train_config.eval_every == 0 or final:
                    ppl = perplexity(model, valid)
                    entry = (step, running / running_n, ppl)
                    history.append(entry)
                    if log_fh:
                        log_fh.write(f"{step}\t{entry[1]:.6f}\t{ppl:.6f}\n")
                        log_fh.flush()
                    log.info("step %d train_loss %.4f valid_ppl %.3f", *entry)
                    running, running_n = 0.0, 0
                periodic = train_config.checkpoint_every and step % train_config.checkpoint_every == 0
                if checkpoint_path and (periodic or final):
                    state.epoch_order, state.cursor = order, cursor
                    _snapshot(state, rng, model, opt)
                    target = Path(checkpoint_path)
                    if periodic and not final:
                        target = target.with_name(f"{target.stem}.step{step}{target.suffix}")
                    save_checkpoint(target, model, source_vocab, target_vocab, state, train_config)
                    last_good = target
        finally:
            if log_fh:
                log_fh.close()
        state.epoch_order, state.cursor = order, cursor
        _snapshot(state, rng, model, opt)
        model.eval()
    return TrainResult(model, state, history)


def _snapshot(state: TrainingState, rng: np.random.Generator, model, opt) -> None:
    state.rng_state = rng.bit_generator.state
    state.torch_rng = torch.get_rng_state().numpy().copy()
    state.optimizer = _optimizer_arrays(model, opt)
