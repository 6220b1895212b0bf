"""Greedy and beam-search decoding.

Generation never emits PAD, BOS or UNK.  A hypothesis has at most
``max_len`` generated tokens counting the closing EOS; one that reaches
``max_len`` content symbols without EOS is returned with ``truncated=True``.
Argmax ties go to the lowest vocabulary index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch

from .model import Seq2SeqTransformer
from .vocab import BOS, EOS, PAD, UNK, Vocabulary

BLOCKED_OUTPUTS = (PAD, BOS, UNK)


@dataclass(frozen=True)
class Hypothesis:
    text: str
    ids: tuple[int, ...]  # generated ids without BOS/EOS
    log_prob: float
    score: float  # log_prob / length**alpha
    truncated: bool


def _step_log_probs(logits: torch.Tensor) -> torch.Tensor:
    logits = logits.clone()
    logits[..., list(BLOCKED_OUTPUTS)] = float("-inf")
    return torch.log_softmax(logits, dim=-1)


def _limit(model: Seq2SeqTransformer, max_len: int) -> int:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    return min(max_len, model.config.max_sequence_length - 1)


def _source_tensor(model: Seq2SeqTransformer, source: str, vocab: Vocabulary) -> torch.Tensor:
    ids = vocab.encode(source)[: model.config.max_sequence_length]
    return torch.tensor([ids], dtype=torch.long)


@torch.no_grad()
def greedy_decode(
    model: Seq2SeqTransformer,
    source: str,
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
    max_len: int = 100,
) -> Hypothesis:
    return greedy_decode_batch(model, [source], source_vocab, target_vocab, max_len)[0]


@torch.no_grad()
def greedy_decode_batch(
    model: Seq2SeqTransformer,
    sources: Sequence[str],
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
    max_len: int = 100,
) -> list[Hypothesis]:
    """Greedy decoding of several sources at once (padded to a common length)."""
    was_training = model.training
    model.eval()
    try:
        if not sources:
            return []
        limit = _limit(model, max_len)
        encoded = [source_vocab.encode(s)[: model.config.max_sequence_length] for s in sources]
        width = max(len(e) for e in encoded)
        src = torch.full((len(encoded), width), PAD, dtype=torch.long)
        for i, e in enumerate(encoded):
            src[i, : len(e)] = torch.tensor(e)
        memory, src_blocked = model.encode(src)
        n = len(sources)
        prefix = torch.full((n, 1), BOS, dtype=torch.long)
        done = torch.zeros(n, dtype=torch.bool)
        log_prob = torch.zeros(n, dtype=torch.float64)
        for _ in range(limit):
            lp = _step_log_probs(model.decode(memory, src_blocked, prefix)[:, -1])
            best = lp.argmax(dim=-1)
            log_prob += torch.where(done, 0.0, lp.gather(1, best[:, None])[:, 0].double())
            best = torch.where(done, torch.full_like(best, PAD), best)
            prefix = torch.cat([prefix, best[:, None]], dim=1)
            done |= best == EOS
            if bool(done.all()):
                break
        out = []
        for i in range(n):
            row = prefix[i, 1:].tolist()
            finished = EOS in row
            ids = tuple(row[: row.index(EOS)] if finished else [t for t in row if t != PAD])
            lp_i = float(log_prob[i])
            out.append(Hypothesis(target_vocab.decode(ids), ids, lp_i, lp_i, not finished))
        return out
    finally:
        model.train(was_training)


@torch.no_grad()
def beam_decode(
    model: Seq2SeqTransformer,
    source: str,
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
    beam_width: int = 4,
    max_len: int = 100,
    length_penalty: float = 0.0,
) -> list[Hypothesis]:
    """Beam search returning up to ``beam_width`` hypotheses, best first.

    At each step the ``beam_width`` best expansions of all live beams are
    kept; those ending in EOS are finished.  Final ranking uses
    ``log_prob / length**length_penalty`` with length counted in generated
    tokens including EOS.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    was_training = model.training
    model.eval()
    try:
        limit = _limit(model, max_len)
        memory, src_blocked = model.encode(_source_tensor(model, source, source_vocab))
        alive: list[tuple[list[int], float]] = [([BOS], 0.0)]
        finished: list[tuple[tuple[int, ...], float, int, bool]] = []
        for step in range(1, limit + 1):
            prefix = torch.tensor([ids for ids, _ in alive], dtype=torch.long)
            a = prefix.shape[0]
            lp = _step_log_probs(
                model.decode(memory.expand(a, -1, -1), src_blocked.expand(a, -1, -1, -1), prefix)[:, -1]
            ).double()
            totals = (torch.tensor([s for _, s in alive], dtype=torch.float64)[:, None] + lp).reshape(-1)
            order = torch.sort(totals, descending=True, stable=True).indices
            vocab_size = lp.shape[1]
            new_alive = []
            taken = 0
            for flat in order.tolist():
                if taken == beam_width:
                    break
                total = float(totals[flat])
                if total == float("-inf"):
                    break
                taken += 1
                beam, token = divmod(flat, vocab_size)
                ids = alive[beam][0]
                if token == EOS:
                    finished.append((tuple(ids[1:]), total, step, False))
                else:
                    new_alive.append((ids + [token], total))
            alive = new_alive
            if not alive:
                break
        finished += [(tuple(ids[1:]), s, limit, True) for ids, s in alive]

        def norm(item):
            ids, total, length, _ = item
            return total / (length**length_penalty) if length_penalty else total

        ranked = sorted(finished, key=lambda item: (-norm(item), item[0]))[:beam_width]
        return [
            Hypothesis(target_vocab.decode(ids), ids, total, norm((ids, total, length, trunc)), trunc)
            for ids, total, length, trunc in ranked
        ]
    finally:
        model.train(was_training)


@torch.no_grad()
def sequence_log_prob(
    model: Seq2SeqTransformer, source_ids: Sequence[int], target_ids: Sequence[int], terminated: bool
) -> float:
    """Log-probability of generating ``target_ids`` (plus EOS if ``terminated``) under decode masking."""
    model.eval()
    src = torch.tensor([list(source_ids)], dtype=torch.long)
    gold = list(target_ids) + ([EOS] if terminated else [])
    tgt_in = torch.tensor([[BOS] + gold[:-1]], dtype=torch.long)
    lp = _step_log_probs(model(src, tgt_in)[0]).double()
    return float(sum(lp[i, t] for i, t in enumerate(gold)))
