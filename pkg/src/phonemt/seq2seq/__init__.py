"""Small encoder-decoder transformer trained from scratch on character or word symbols."""

from .checkpoint import (
    Checkpoint,
    ConfigMismatchError,
    CorruptFileError,
    VersionMismatchError,
    load_checkpoint,
    save_checkpoint,
)
from .decode import Hypothesis, beam_decode, greedy_decode, greedy_decode_batch
from .model import ModelConfig, Seq2SeqTransformer, ShapeMismatchError, loss_and_grad, sequence_loss
from .train import DivergenceDetected, TrainConfig, TrainingState, TrainResult, train
from .vocab import (
    BOS,
    EOS,
    PAD,
    UNK,
    IndexOutOfRangeError,
    VocabMode,
    Vocabulary,
    build_vocab,
    vocab_from_texts,
)

__all__ = [
    "BOS", "EOS", "PAD", "UNK",
    "Checkpoint", "ConfigMismatchError", "CorruptFileError", "DivergenceDetected",
    "Hypothesis", "IndexOutOfRangeError", "ModelConfig", "Seq2SeqTransformer",
    "ShapeMismatchError", "TrainConfig", "TrainResult", "TrainingState",
    "VersionMismatchError", "VocabMode", "Vocabulary",
    "beam_decode", "build_vocab", "greedy_decode", "greedy_decode_batch",
    "load_checkpoint", "loss_and_grad", "save_checkpoint", "sequence_loss",
    "train", "vocab_from_texts",
]
