"""Versioned binary checkpoints.

Layout (all integers little-endian):

    magic    4 bytes  "SMDC"
    version  1 byte   currently 1
    dims     5 x u32  source vocab, target vocab, embedding, hidden, attention
    vocabs   source then target: u32 token count, then per token a u32 byte
             length followed by the token's UTF-8 bytes
    tensors  float64 row-major, in ModelParams tensor order, no per-tensor
             header (shapes follow from the dims)

Round-trips are bit-exact. Malformed files fail with a distinct message per
defect: bad magic, unsupported version, truncated file, shape mismatch,
trailing data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ModelConfig, ModelParams, _params_from_arrays
from .vocab import Vocabulary

MAGIC = b"SMDC"
VERSION = 1


class CheckpointError(ValueError):
    """Raised for any malformed or inconsistent checkpoint file."""


@dataclass
class Model:
    """A loadable unit: weights plus everything needed to use them."""

    config: ModelConfig
    params: ModelParams
    source_vocab: Vocabulary
    target_vocab: Vocabulary


def save_checkpoint(params: ModelParams, config: ModelConfig,
                    source_vocab: Vocabulary, target_vocab: Vocabulary,
                    path: str | Path) -> None:
    chunks = [MAGIC, struct.pack("<B", VERSION)]
    chunks.append(struct.pack(
        "<5I", config.source_vocab_size, config.target_vocab_size,
        config.embedding_dim, config.hidden_dim, config.attention_dim))
    for vocab in (source_vocab, target_vocab):
        chunks.append(struct.pack("<I", len(vocab)))
        for token in vocab.tokens:
            raw = token.encode("utf-8")
            chunks.append(struct.pack("<I", len(raw)))
            chunks.append(raw)
    for arr in params.arrays():
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path: str | Path) -> Model:
    reader = _Reader(Path(path).read_bytes())
    if reader.take(4) != MAGIC:
        raise CheckpointError("bad magic")
    version = reader.take(1)[0]
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}")
    dims = [reader.u32() for _ in range(5)]
    config = ModelConfig(*dims)

    vocabs = []
    for _ in range(2):
        count = reader.u32()
        tokens = []
        for _ in range(count):
            length = reader.u32()
            tokens.append(reader.take(length).decode("utf-8"))
        vocabs.append(Vocabulary(tokens))
    if len(vocabs[0]) != config.source_vocab_size:
        raise CheckpointError(
            f"shape mismatch: source vocab holds {len(vocabs[0])} tokens, "
            f"dims say {config.source_vocab_size}")
    if len(vocabs[1]) != config.target_vocab_size:
        raise CheckpointError(
            f"shape mismatch: target vocab holds {len(vocabs[1])} tokens, "
            f"dims say {config.target_vocab_size}")

    template = ModelParams.zeros(config)
    arrays = []
    for a in template.arrays():
        raw = reader.take(a.size * 8)
        arrays.append(np.frombuffer(raw, dtype="<f8").reshape(a.shape).copy())
    if reader.pos != len(reader.data):
        raise CheckpointError(
            f"trailing data: {len(reader.data) - reader.pos} unread bytes")
    return Model(config=config, params=_params_from_arrays(arrays),
                 source_vocab=vocabs[0], target_vocab=vocabs[1])
