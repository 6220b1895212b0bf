"""Train a tiny transformer on a copy-reverse task, decode, and round-trip a checkpoint."""

from __future__ import annotations

import random
import tempfile
from pathlib import Path

from phonemt.seq2seq import (
    ModelConfig,
    TrainConfig,
    beam_decode,
    greedy_decode,
    load_checkpoint,
    save_checkpoint,
    train,
    vocab_from_texts,
)


def main() -> None:
    rng = random.Random(0)
    words = ["".join(rng.choice("abcd") for _ in range(rng.randint(2, 5))) for _ in range(48)]
    pairs = [(w, w[::-1]) for w in words]
    vocab = vocab_from_texts(words)

    model_cfg = ModelConfig(layers=1, model_dim=32, heads=4, feedforward_dim=64, max_sequence_length=12, seed=1)
    train_cfg = TrainConfig(steps=400, batch_size=16, learning_rate=3e-3, warmup_steps=50, eval_every=100)
    result = train(pairs, pairs[:8], vocab, vocab, model_cfg, train_cfg)
    for step, loss, ppl in result.log:
        print(f"step {step:4d}  train loss {loss:.3f}  valid ppl {ppl:.3f}")

    for src, gold in pairs[:4]:
        hyp = greedy_decode(result.model, src, vocab, vocab, max_len=10)
        print(f"{src:>6} -> {hyp.text:<6} (gold {gold})")

    for hyp in beam_decode(result.model, "abcd", vocab, vocab, beam_width=3, max_len=10):
        print(f"beam: {hyp.text:<8} score {hyp.score:.3f}")

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "model.ckpt"
        save_checkpoint(path, result.model, vocab, vocab, result.state, train_cfg)
        restored = load_checkpoint(path)
        print("checkpoint bytes:", path.stat().st_size, "step:", restored.state.step)


if __name__ == "__main__":
    main()
