"""Binary checkpoint container.

All integers are little-endian::

    magic       8 bytes   b"PHMTCKPT"
    version     u32
    header      u32 length + UTF-8 JSON (model config, training config, scalar state)
    src vocab   u32 length + UTF-8 JSON
    tgt vocab   u32 length + UTF-8 JSON
    n_arrays    u32
    per array   u16 name length + UTF-8 name
                u8 dtype length + ASCII numpy dtype string (e.g. "<f4")
                u8 ndim, ndim x u64 dims
                u64 byte count + raw little-endian data
    checksum    32 bytes  SHA-256 of everything above

Array names: ``param.<name>`` for model weights, ``adam.exp_avg.<name>`` and
``adam.exp_avg_sq.<name>`` for optimizer moments, ``state.*`` for training
state.  JSON is written with sorted keys so identical runs give identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .model import ModelConfig, Seq2SeqTransformer
from .train import TrainConfig, TrainingState
from .vocab import Vocabulary

MAGIC = b"PHMTCKPT"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


class CorruptFileError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class ConfigMismatchError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    model: Seq2SeqTransformer
    source_vocab: Vocabulary
    target_vocab: Vocabulary
    state: TrainingState
    train_config: TrainConfig | None
    arrays: dict[str, np.ndarray]

    @property
    def config(self) -> ModelConfig:
        return self.model.config


def _block(fh, data: bytes) -> None:
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False).encode("utf-8")


def save_checkpoint(
    path: str | os.PathLike,
    model: Seq2SeqTransformer,
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
    state: TrainingState | None = None,
    train_config: TrainConfig | None = None,
) -> None:
    state = state or TrainingState()
    header = {
        "model_config": model.config.to_dict(),
        "train_config": train_config.to_dict() if train_config else None,
        "state": {"step": state.step, "cursor": state.cursor, "rng_state": state.rng_state},
    }
    arrays: dict[str, np.ndarray] = {
        f"param.{name}": t.detach().cpu().numpy() for name, t in model.state_dict().items()
    }
    arrays.update(state.optimizer)
    arrays["state.epoch_order"] = np.asarray(state.epoch_order, dtype=np.int64)
    arrays["state.torch_rng"] = np.asarray(state.torch_rng, dtype=np.uint8)

    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    _block(buf, _dumps(header))
    _block(buf, source_vocab.to_json().encode("utf-8"))
    _block(buf, target_vocab.to_json().encode("utf-8"))
    buf.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw_name = name.encode("utf-8")
        dtype = arr.dtype.str.encode("ascii")
        buf.write(struct.pack("<H", len(raw_name)) + raw_name)
        buf.write(struct.pack("<B", len(dtype)) + dtype)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        data = arr.tobytes()
        buf.write(struct.pack("<Q", len(data)))
        buf.write(data)
    payload = buf.getvalue()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload + hashlib.sha256(payload).digest())
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptFileError("unexpected end of checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def block(self) -> bytes:
        (n,) = self.unpack("<I")
        return self.take(n)


def load_checkpoint(path: str | os.PathLike, expected_config: ModelConfig | None = None) -> Checkpoint:
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 4 + 32 or blob[: len(MAGIC)] != MAGIC:
        raise CorruptFileError(f"{path}: not a checkpoint file")
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CorruptFileError(f"{path}: checksum mismatch")
    r = _Reader(payload)
    r.take(len(MAGIC))
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    header = json.loads(r.block().decode("utf-8"))
    source_vocab = Vocabulary.from_json(r.block().decode("utf-8"))
    target_vocab = Vocabulary.from_json(r.block().decode("utf-8"))
    (count,) = r.unpack("<I")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (dtype_len,) = r.unpack("<B")
        dtype = np.dtype(r.take(dtype_len).decode("ascii"))
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}Q") if ndim else ()
        (nbytes,) = r.unpack("<Q")
        arrays[name] = np.frombuffer(r.take(nbytes), dtype=dtype).reshape(shape).copy()

    config = ModelConfig(**header["model_config"])
    if expected_config is not None and config != expected_config:
        raise ConfigMismatchError(f"{path}: checkpoint was trained with {config}, expected {expected_config}")
    model = Seq2SeqTransformer(config, len(source_vocab), len(target_vocab))
    params = {k[len("param."):]: torch.from_numpy(v) for k, v in arrays.items() if k.startswith("param.")}
    try:
        model.load_state_dict(params, strict=True)
    except RuntimeError as exc:
        raise ConfigMismatchError(f"{path}: weights do not match the stored config: {exc}") from None
    model.eval()
    st = header["state"]
    state = TrainingState(
        step=st["step"],
        epoch_order=arrays.get("state.epoch_order", np.zeros(0, dtype=np.int64)),
        cursor=st["cursor"],
        rng_state=st["rng_state"],
        torch_rng=arrays.get("state.torch_rng", np.zeros(0, dtype=np.uint8)),
        optimizer={k: v for k, v in arrays.items() if k.startswith("adam.")},
    )
    tc = header.get("train_config")
    return Checkpoint(model, source_vocab, target_vocab, state, TrainConfig(**tc) if tc else None, arrays)
