"""Binary per-token embedding files (magic "MWEE").

Little-endian layout: magic "MWEE", version u32 = 1, dim u32,
n_sentences u32, then per sentence a sentence_index u32, n_tokens u32,
and n_tokens x dim float32 values row-major.  Sentence indices are
0-based positions into the corpus the file was exported from and must be
strictly increasing.  Vectors are stored and kept at 32-bit precision;
training code promotes to float64 on use.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from .corpus import Corpus, Sentence

MAGIC = b"MWEE"
VERSION = 1


class EmbeddingFormatError(ValueError):
    pass


class BadMagic(EmbeddingFormatError):
    pass


class VersionUnsupported(EmbeddingFormatError):
    pass


class TruncatedFile(EmbeddingFormatError):
    pass


class NonFiniteValue(EmbeddingFormatError):
    def __init__(self, sentence_index: int, position: int):
        super().__init__(
            f"non-finite value at flat position {position} of sentence {sentence_index}"
        )
        self.sentence_index = sentence_index
        self.position = position


class TokenCountMismatch(ValueError):
    def __init__(self, sentence_index: int, expected: int, got: int):
        super().__init__(
            f"sentence {sentence_index}: corpus has {expected} tokens, file has {got} rows"
        )
        self.sentence_index = sentence_index


@dataclass
class EmbeddingFile:
    dim: int
    sentence_embeddings: list[tuple[int, np.ndarray]] = field(default_factory=list)


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise TruncatedFile(f"expected {n} bytes, got {len(data)}")
    return data


def read_embeddings(stream: BinaryIO) -> EmbeddingFile:
    magic = stream.read(4)
    if magic != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {magic!r}")
    version, dim, n_sentences = struct.unpack("<III", _read_exact(stream, 12))
    if version != VERSION:
        raise VersionUnsupported(f"embedding file version {version} not supported")
    if dim == 0:
        raise EmbeddingFormatError("embedding dim must be positive")

    out = EmbeddingFile(dim=dim)
    prev_index = -1
    for _ in range(n_sentences):
        sentence_index, n_tokens = struct.unpack("<II", _read_exact(stream, 8))
        if sentence_index <= prev_index:
            raise EmbeddingFormatError(
                f"sentence index {sentence_index} not strictly increasing after {prev_index}"
            )
        prev_index = sentence_index
        payload = _read_exact(stream, 4 * n_tokens * dim)
        vectors = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(n_tokens, dim)
        finite = np.isfinite(vectors)
        if not finite.all():
            position = int(np.flatnonzero(~finite.ravel())[0])
            raise NonFiniteValue(sentence_index, position)
        out.sentence_embeddings.append((sentence_index, vectors))
    return out


def write_embeddings(efile: EmbeddingFile, stream: BinaryIO) -> None:
    if efile.dim <= 0:
        raise EmbeddingFormatError("embedding dim must be positive")
    stream.write(MAGIC)
    stream.write(struct.pack("<III", VERSION, efile.dim, len(efile.sentence_embeddings)))
    prev_index = -1
    for sentence_index, vectors in efile.sentence_embeddings:
        if sentence_index <= prev_index:
            raise EmbeddingFormatError(
                f"sentence index {sentence_index} not strictly increasing after {prev_index}"
            )
        prev_index = sentence_index
        vectors = np.asarray(vectors)
        if vectors.ndim != 2 or vectors.shape[1] != efile.dim:
            raise EmbeddingFormatError(
                f"sentence {sentence_index}: rows must be x{efile.dim}, got shape {vectors.shape}"
            )
        stream.write(struct.pack("<II", sentence_index, vectors.shape[0]))
        stream.write(np.ascontiguousarray(vectors, dtype="<f4").tobytes())


@dataclass
class JoinResult:
    """Corpus sentences paired with their vectors; `missing` counts corpus
    sentences the file had no entry for (skipped with a warning count,
    never silently)."""

    pairs: list[tuple[Sentence, np.ndarray]]
    missing: int


def join(corpus: Corpus, efile: EmbeddingFile) -> JoinResult:
    """Align file entries with corpus sentences by position.

    Raises TokenCountMismatch when an entry's row count differs from the
    sentence's token count.
    """
    by_index = dict(efile.sentence_embeddings)
    for sentence_index in by_index:
        if sentence_index >= len(corpus.sentences):
            raise EmbeddingFormatError(
                f"sentence index {sentence_index} outside corpus of {len(corpus.sentences)}"
            )
    pairs = []
    missing = 0
    for idx, sentence in enumerate(corpus.sentences):
        vectors = by_index.get(idx)
        if vectors is None:
            missing += 1
            continue
        if vectors.shape[0] != len(sentence):
            raise TokenCountMismatch(idx, len(sentence), vectors.shape[0])
        pairs.append((sentence, vectors))
    return JoinResult(pairs=pairs, missing=missing)
