"""IOB tag-scheme validation and span conversion.

Two conventions are supported.  IOB2 opens every chunk with B; IOB1 opens
chunks with I and uses B only when a chunk starts immediately after
another chunk.  Conversion is lenient by default: sequences a tagger can
emit but a scheme forbids are repaired (I after O opens a chunk under
IOB2; B at start or after O opens a chunk under IOB1).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .corpus import Label


class SchemeMode(Enum):
    IOB1 = "iob1"
    IOB2 = "iob2"


@dataclass(frozen=True, order=True)
class Span:
    """Half-open token range [start, end) covered by one chunk."""

    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")


@dataclass(frozen=True)
class Violation:
    position: int
    reason: str


class StrictModeViolation(ValueError):
    pass


class OverlappingSpans(ValueError):
    pass


class SpanOutOfRange(ValueError):
    pass


def validate(labels: Sequence[Label], mode: SchemeMode) -> list[Violation]:
    """Report scheme violations as data; an empty list means valid."""
    violations = []
    for t, label in enumerate(labels):
        prev = labels[t - 1] if t > 0 else None
        if mode is SchemeMode.IOB2:
            if label is Label.I and prev in (None, Label.O):
                reason = "I at sequence start" if prev is None else "I after O"
                violations.append(Violation(t, reason))
        else:
            if label is Label.B and prev in (None, Label.O):
                violations.append(Violation(t, "B without preceding chunk"))
    return violations


def tags_to_spans(
    labels: Sequence[Label], mode: SchemeMode, strict: bool = False
) -> list[Span]:
    """Extract chunk spans from a label sequence.

    Lenient mode repairs invalid prefixes; strict mode raises
    StrictModeViolation whenever validate() is non-empty.
    """
    if strict:
        violations = validate(labels, mode)
        if violations:
            v = violations[0]
            raise StrictModeViolation(f"position {v.position}: {v.reason}")

    spans: list[Span] = []
    open_at: int | None = None
    for t, label in enumerate(labels):
        if label is Label.O:
            if open_at is not None:
                spans.append(Span(open_at, t))
                open_at = None
        elif label is Label.B:
            # Closes any running chunk and opens a new one.  A B with no
            # chunk to adjoin (invalid under IOB1) repairs to an opener.
            if open_at is not None:
                spans.append(Span(open_at, t))
            open_at = t
        else:  # Label.I
            if open_at is None:
                # IOB2 repair: I after O / at start opens a chunk.
                open_at = t
    if open_at is not None:
        spans.append(Span(open_at, len(labels)))
    return spans


def spans_to_tags(spans: Sequence[Span], length: int, mode: SchemeMode) -> list[Label]:
    """Render spans as labels; inverse of tags_to_spans on valid input."""
    tags = [Label.O] * length
    prev_end = -1
    for span in spans:
        if span.end > length:
            raise SpanOutOfRange(f"span [{span.start}, {span.end}) exceeds length {length}")
        if span.start < prev_end:
            raise OverlappingSpans(f"span [{span.start}, {span.end}) overlaps its predecessor")
        if mode is SchemeMode.IOB2:
            opener = Label.B
        else:
            opener = Label.B if span.start == prev_end else Label.I
        tags[span.start] = opener
        for t in range(span.start + 1, span.end):
            tags[t] = Label.I
        prev_end = span.end
    return tags
