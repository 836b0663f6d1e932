"""Minimal reader for the nine-column tab-separated corpus layout.

The exporter only needs the word column (column 2) and sentence
boundaries (blank lines); everything else passes through untouched by
this tool, so nothing else is parsed.
"""

from __future__ import annotations

from pathlib import Path


class CorpusReadError(ValueError):
    pass


def read_sentences(path: str | Path) -> list[list[str]]:
    """Word lists per sentence, in file order."""
    text = Path(path).read_text(encoding="utf-8")
    sentences: list[list[str]] = []
    current: list[str] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            if current:
                sentences.append(current)
                current = []
            continue
        fields = line.split("\t")
        if len(fields) < 2 or not fields[1]:
            raise CorpusReadError(f"line {line_no}: expected a word in column 2")
        current.append(fields[1])
    if current:
        sentences.append(current)
    return sentences
