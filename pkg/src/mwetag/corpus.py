"""DiMSUM-style corpus handling.

The on-disk layout is CoNLL-like: UTF-8 text, one token per line with up
to nine tab-separated columns (token offset, word, lowercase lemma, POS,
MWE tag, parent offset, strength, supersense, sentence id), sentences
separated by one blank line.  Only the word and the MWE tag feed the
models; the remaining columns are stored untouched so files round-trip.
"""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, TextIO


class Label(IntEnum):
    """Token-level MWE tag.

    Index order is load-bearing: argmax tie-breaks resolve to the lowest
    index, so B wins ties.
    """

    B = 0
    I = 1
    O = 2


N_LABELS = len(Label)


class CorpusError(ValueError):
    """A corpus file violates the tab-separated layout."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class MalformedRecord(CorpusError):
    pass


class UnknownTag(CorpusError):
    def __init__(self, raw: str, line_no: int | None = None):
        super().__init__(f"unknown MWE tag {raw!r}", line_no)
        self.raw = raw


class NonConsecutiveOffset(CorpusError):
    pass


class InvalidEncoding(CorpusError):
    """Input bytes are not valid UTF-8; reported with the byte offset."""

    def __init__(self, byte_offset: int):
        super().__init__(f"invalid UTF-8 byte sequence at byte offset {byte_offset}")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class Token:
    offset: int
    word: str
    lemma: str = ""
    pos: str = ""
    mwe_tag_raw: str = "O"
    parent_offset: int = 0
    strength: str = ""
    supersense: str = ""
    sentence_id: str = ""


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[Token, ...]
    labels: tuple[Label, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.labels) or not self.tokens:
            raise ValueError("sentence needs equal, nonzero token and label counts")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(t.word for t in self.tokens)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]
    split_name: str = ""

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)


_TAG_MAP = {
    "B": Label.B,
    "b": Label.B,
    "I": Label.I,
    "i": Label.I,
    "Ī": Label.I,  # mojibake variant of I seen in the wild
    "O": Label.O,
    "o": Label.O,
}


def normalize_tag(raw: str) -> Label:
    """Fold a raw MWE tag string to one of the three modeled labels.

    Lowercase variants (the weak-MWE convention) collapse onto their
    uppercase counterparts.  Anything else raises UnknownTag.
    """
    tag = raw.strip()
    try:
        return _TAG_MAP[tag]
    except KeyError:
        raise UnknownTag(raw) from None


def _finish_sentence(tokens: list[Token], fallback_id: str) -> Sentence:
    sent_id = next((t.sentence_id for t in tokens if t.sentence_id), fallback_id)
    labels = tuple(normalize_tag(t.mwe_tag_raw) for t in tokens)
    return Sentence(id=sent_id, tokens=tuple(tokens), labels=labels)


def parse_dimsum(source: Iterable[str] | TextIO | str, split_name: str = "") -> Corpus:
    """Parse tab-separated token records into an immutable Corpus.

    ``source`` may be a text stream, an iterable of lines, or one string.
    A blank line terminates a sentence; trailing blank lines are ignored.
    Lines with 5-9 fields get empty/zero defaults for missing trailing
    columns; fields beyond the ninth are ignored.
    """
    if isinstance(source, str):
        source = io.StringIO(source)

    sentences: list[Sentence] = []
    tokens: list[Token] = []
    for line_no, line in enumerate(source, start=1):
        line = line.rstrip("\r\n")
        if not line:
            if tokens:
                sentences.append(_finish_sentence(tokens, f"s{len(sentences) + 1}"))
                tokens = []
            continue

        fields = line.split("\t")
        if len(fields) < 5:
            raise MalformedRecord(
                f"expected at least 5 tab-separated fields, got {len(fields)}", line_no
            )
        fields = fields[:9] + [""] * (9 - len(fields))

        try:
            offset = int(fields[0])
        except ValueError:
            raise MalformedRecord(f"token offset {fields[0]!r} is not an integer", line_no) from None
        if offset != len(tokens) + 1:
            raise NonConsecutiveOffset(
                f"token offset {offset} breaks the 1,2,3,... sequence", line_no
            )
        word = fields[1]
        if not word:
            raise MalformedRecord("empty word field", line_no)
        try:
            parent = int(fields[5]) if fields[5] else 0
        except ValueError:
            raise MalformedRecord(f"parent offset {fields[5]!r} is not an integer", line_no) from None
        if parent < 0:
            raise MalformedRecord(f"negative parent offset {parent}", line_no)

        raw_tag = fields[4]
        try:
            normalize_tag(raw_tag)
        except UnknownTag:
            raise UnknownTag(raw_tag, line_no) from None

        tokens.append(
            Token(
                offset=offset,
                word=word,
                lemma=fields[2],
                pos=fields[3],
                mwe_tag_raw=raw_tag,
                parent_offset=parent,
                strength=fields[6],
                supersense=fields[7],
                sentence_id=fields[8],
            )
        )

    if tokens:
        sentences.append(_finish_sentence(tokens, f"s{len(sentences) + 1}"))
    return Corpus(sentences=tuple(sentences), split_name=split_name)


def read_dimsum_file(path: str | Path, split_name: str | None = None) -> Corpus:
    """Read and parse a corpus file, rejecting invalid UTF-8 explicitly."""
    path = Path(path)
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidEncoding(exc.start) from None
    if split_name is None:
        split_name = path.stem
    return parse_dimsum(text, split_name=split_name)


def write_dimsum(corpus: Corpus, stream: TextIO) -> None:
    """Serialize a Corpus back to the nine-column layout, one blank line
    between sentences.  parse_dimsum(write_dimsum(c)) == c field-by-field."""
    for sentence in corpus.sentences:
        for t in sentence.tokens:
            stream.write(
                "\t".join(
                    (
                        str(t.offset),
                        t.word,
                        t.lemma,
                        t.pos,
                        t.mwe_tag_raw,
                        str(t.parent_offset),
                        t.strength,
                        t.supersense,
                        t.sentence_id,
                    )
                )
                + "\n"
            )
        stream.write("\n")


def exclude_sentences(corpus: Corpus, ids: Iterable[str]) -> Corpus:
    """Drop sentences whose id is in ``ids`` (order otherwise preserved)."""
    drop = set(ids)
    kept = tuple(s for s in corpus.sentences if s.id not in drop)
    return Corpus(sentences=kept, split_name=corpus.split_name)


def corpus_stats(corpus: Corpus) -> tuple[int, int, dict[Label, int]]:
    """Sentence count, token count, and per-label histogram (all labels
    present as keys, zero-count included)."""
    histogram = Counter()
    for sentence in corpus.sentences:
        histogram.update(sentence.labels)
    return (
        len(corpus.sentences),
        corpus.n_tokens,
        {label: histogram.get(label, 0) for label in Label},
    )
