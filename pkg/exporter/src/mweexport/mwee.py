"""Writer for the MWEE per-token embedding format.

Little-endian layout: magic "MWEE", version u32 = 1, dim u32,
n_sentences u32, then per sentence: sentence_index u32, n_tokens u32,
n_tokens x dim float32 row-major.
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Sequence

import numpy as np

MAGIC = b"MWEE"
VERSION = 1


def write_mwee(stream: BinaryIO, dim: int, entries: Sequence[tuple[int, np.ndarray]]) -> None:
    if dim <= 0:
        raise ValueError("embedding dim must be positive")
    stream.write(MAGIC)
    stream.write(struct.pack("<III", VERSION, dim, len(entries)))
    prev = -1
    for sentence_index, vectors in entries:
        if sentence_index <= prev:
            raise ValueError(f"sentence index {sentence_index} not strictly increasing")
        prev = sentence_index
        vectors = np.ascontiguousarray(vectors, dtype="<f4")
        if vectors.ndim != 2 or vectors.shape[1] != dim:
            raise ValueError(f"sentence {sentence_index}: expected rows x {dim}, got {vectors.shape}")
        stream.write(struct.pack("<II", sentence_index, vectors.shape[0]))
        stream.write(vectors.tobytes())
