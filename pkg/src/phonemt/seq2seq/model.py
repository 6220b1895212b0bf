"""Pre-norm encoder-decoder transformer with sinusoidal positions."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .vocab import PAD


class ShapeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    model_dim: int = 128
    heads: int = 4
    feedforward_dim: int = 512
    max_sequence_length: int = 256
    dropout_rate: float = 0.1
    seed: int = 1

    def __post_init__(self):
        for name in ("layers", "model_dim", "heads", "feedforward_dim", "max_sequence_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.model_dim % self.heads:
            raise ValueError("model_dim must be divisible by heads")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def sinusoidal_positions(length: int, dim: int) -> torch.Tensor:
    pos = torch.arange(length, dtype=torch.float64)[:, None]
    rate = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(pos * rate)
    table[:, 1::2] = torch.cos(pos * rate)[:, : dim // 2]
    return table


class MultiHeadAttention(nn.Module):
    def __init__(self, dim: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, dim)
        self.dropout = nn.Dropout(dropout)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, t, _ = x.shape
        return x.view(b, t, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, query: torch.Tensor, memory: torch.Tensor, blocked: torch.Tensor) -> torch.Tensor:
        # blocked: bool, broadcastable to (batch, heads, query_len, key_len); True = masked out
        q, k, v = self._split(self.q(query)), self._split(self.k(memory)), self._split(self.v(memory))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(blocked, float("-inf"))
        weights = self.dropout(torch.softmax(scores, dim=-1))
        ctx = (weights @ v).transpose(1, 2).reshape(query.shape)
        return self.out(ctx)


class FeedForward(nn.Module):
    def __init__(self, dim: int, hidden: int, dropout: float):
        super().__init__()
        self.inner = nn.Linear(dim, hidden)
        self.outer = nn.Linear(hidden, dim)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.outer(self.dropout(F.relu(self.inner(x))))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.norm_attn = nn.LayerNorm(cfg.model_dim)
        self.attn = MultiHeadAttention(cfg.model_dim, cfg.heads, cfg.dropout_rate)
        self.norm_ff = nn.LayerNorm(cfg.model_dim)
        self.ff = FeedForward(cfg.model_dim, cfg.feedforward_dim, cfg.dropout_rate)
        self.dropout = nn.Dropout(cfg.dropout_rate)

    def forward(self, x, src_blocked):
        h = self.norm_attn(x)
        x = x + self.dropout(self.attn(h, h, src_blocked))
        return x + self.dropout(self.ff(self.norm_ff(x)))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.norm_self = nn.LayerNorm(cfg.model_dim)
        self.self_attn = MultiHeadAttention(cfg.model_dim, cfg.heads, cfg.dropout_rate)
        self.norm_cross = nn.LayerNorm(cfg.model_dim)
        self.cross_attn = MultiHeadAttention(cfg.model_dim, cfg.heads, cfg.dropout_rate)
        self.norm_ff = nn.LayerNorm(cfg.model_dim)
        self.ff = FeedForward(cfg.model_dim, cfg.feedforward_dim, cfg.dropout_rate)
        self.dropout = nn.Dropout(cfg.dropout_rate)

    def forward(self, y, memory, tgt_blocked, src_blocked):
        h = self.norm_self(y)
        y = y + self.dropout(self.self_attn(h, h, tgt_blocked))
        y = y + self.dropout(self.cross_attn(self.norm_cross(y), memory, src_blocked))
        return y + self.dropout(self.ff(self.norm_ff(y)))


class Seq2SeqTransformer(nn.Module):
    """Encoder-decoder over index sequences; PAD is index 0 on both sides."""

    def __init__(self, config: ModelConfig, source_vocab_size: int, target_vocab_size: int):
        super().__init__()
        self.config = config
        self.source_vocab_size = source_vocab_size
        self.target_vocab_size = target_vocab_size
        d = config.model_dim
        self.src_embed = nn.Embedding(source_vocab_size, d)
        self.tgt_embed = nn.Embedding(target_vocab_size, d)
        self.encoder = nn.ModuleList(EncoderLayer(config) for _ in range(config.layers))
        self.decoder = nn.ModuleList(DecoderLayer(config) for _ in range(config.layers))
        self.encoder_norm = nn.LayerNorm(d)
        self.decoder_norm = nn.LayerNorm(d)
        self.project = nn.Linear(d, target_vocab_size)
        self.dropout = nn.Dropout(config.dropout_rate)
        self.register_buffer(
            "positions", sinusoidal_positions(config.max_sequence_length, d).float(), persistent=False
        )
        self.reset_parameters()

    def reset_parameters(self) -> None:
        gen = torch.Generator().manual_seed(self.config.seed)
        d = self.config.model_dim
        for name, p in self.named_parameters():
            with torch.no_grad():
                if name.endswith("embed.weight"):
                    p.normal_(0.0, d**-0.5, generator=gen)
                elif "norm" in name:
                    p.fill_(1.0 if name.endswith("weight") else 0.0)
                elif p.dim() > 1:
                    nn.init.xavier_uniform_(p, generator=gen)
                else:
                    p.zero_()

    def _embed(self, table: nn.Embedding, ids: torch.Tensor) -> torch.Tensor:
        x = table(ids) * math.sqrt(self.config.model_dim)
        return self.dropout(x + self.positions[: ids.shape[1]].to(x.dtype))

    def _check(self, ids: torch.Tensor, vocab_size: int, what: str) -> None:
        if ids.dim() != 2:
            raise ShapeMismatchError(f"{what} must be (batch, length), got {tuple(ids.shape)}")
        if ids.shape[1] > self.config.max_sequence_length:
            raise ShapeMismatchError(
                f"{what} length {ids.shape[1]} exceeds max_sequence_length {self.config.max_sequence_length}"
            )
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= vocab_size):
            raise ShapeMismatchError(f"{what} contains indices outside [0, {vocab_size})")

    def encode(self, src: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        self._check(src, self.source_vocab_size, "source")
        src_blocked = (src == PAD)[:, None, None, :]
        x = self._embed(self.src_embed, src)
        for layer in self.encoder:
            x = layer(x, src_blocked)
        return self.encoder_norm(x), src_blocked

    def decode(self, memory: torch.Tensor, src_blocked: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        self._check(tgt_in, self.target_vocab_size, "target prefix")
        t = tgt_in.shape[1]
        causal = torch.ones(t, t, dtype=torch.bool).triu(1)
        tgt_blocked = causal[None, None] | (tgt_in == PAD)[:, None, None, :]
        # a query must always see at least its own position
        tgt_blocked = tgt_blocked & ~torch.eye(t, dtype=torch.bool)[None, None]
        y = self._embed(self.tgt_embed, tgt_in)
        for layer in self.decoder:
            y = layer(y, memory, tgt_blocked, src_blocked)
        return self.project(self.decoder_norm(y))

    def forward(self, src: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        if src.shape[0] != tgt_in.shape[0]:
            raise ShapeMismatchError(f"batch sizes differ: {src.shape[0]} vs {tgt_in.shape[0]}")
        memory, src_blocked = self.encode(src)
        return self.decode(memory, src_blocked, tgt_in)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def sequence_loss(logits: torch.Tensor, tgt_out: torch.Tensor, label_smoothing: float = 0.0) -> torch.Tensor:
    """Mean cross-entropy over non-PAD target positions (0 if there are none)."""
    flat = logits.reshape(-1, logits.shape[-1])
    gold = tgt_out.reshape(-1)
    total = F.cross_entropy(flat, gold, ignore_index=PAD, reduction="sum", label_smoothing=label_smoothing)
    count = int((gold != PAD).sum())
    return total / max(count, 1)


def loss_and_grad(
    model: Seq2SeqTransformer, src: torch.Tensor, tgt_in: torch.Tensor, tgt_out: torch.Tensor
) -> tuple[float, dict[str, torch.Tensor]]:
    """Loss and per-parameter gradients for one batch (model left in its current mode)."""
    if tgt_in.shape != tgt_out.shape:
        raise ShapeMismatchError("decoder input and gold output shapes differ")
    model.zero_grad(set_to_none=True)
    loss = sequence_loss(model(src, tgt_in), tgt_out)
    loss.backward()
    grads = {
        name: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p))
        for name, p in model.named_parameters()
    }
    return loss.item(), grads
