"""Deterministic synthetic corpora in the nine-column layout.

Used when the real DiMSUM distribution is not on disk: the generator
produces splits with exact sentence/token counts so structural checks run
against the same numbers, and draws words from label-correlated pools so
taggers have something learnable.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, Sentence, Token
from .tagscheme import SchemeMode, Span, spans_to_tags

_POS_POOL = ("NOUN", "VERB", "ADP", "DET", "ADJ", "ADV", "PRON", "CONJ")
_SUPERSENSES = ("n.act", "n.event", "v.social", "v.motion")


def _plan_lengths(
    n_sentences: int, n_tokens: int, first_sentence_tokens: int | None
) -> list[int]:
    if n_sentences < 1 or n_tokens < n_sentences:
        raise ValueError("need at least one token per sentence")
    lengths = []
    remaining_tokens = n_tokens
    remaining_sentences = n_sentences
    if first_sentence_tokens is not None:
        lengths.append(first_sentence_tokens)
        remaining_tokens -= first_sentence_tokens
        remaining_sentences -= 1
        if remaining_sentences and remaining_tokens < remaining_sentences:
            raise ValueError("first sentence leaves too few tokens for the rest")
    if remaining_sentences:
        base, extra = divmod(remaining_tokens, remaining_sentences)
        lengths.extend(base + 1 if k < extra else base for k in range(remaining_sentences))
    return lengths


def _sample_spans(rng: np.random.Generator, length: int, span_probability: float) -> list[Span]:
    if length < 2 or rng.random() >= span_probability:
        return []
    n_spans = 2 if (length >= 10 and rng.random() < 0.3) else 1
    spans: list[Span] = []
    cursor = 0
    for _ in range(n_spans):
        span_len = int(rng.integers(2, 5))
        if cursor + span_len > length:
            break
        start = int(rng.integers(cursor, length - span_len + 1))
        spans.append(Span(start, start + span_len))
        cursor = start + span_len
    return spans


def synthetic_corpus(
    n_sentences: int,
    n_tokens: int,
    seed: int,
    split_name: str = "synth",
    id_prefix: str = "synth",
    first_sentence_tokens: int | None = None,
    span_probability: float = 0.45,
) -> Corpus:
    """Generate a corpus with exactly the requested size.

    ``first_sentence_tokens`` pins the first sentence's length, which lets
    a split drop one known sentence and land on a second exact size.
    ``span_probability`` is the chance a sentence carries MWE spans at
    all; the default gives the heavily outside-dominated mix typical of
    the real corpus.
    """
    rng = np.random.default_rng(seed)
    opener_words = [f"bw{k}" for k in range(150)]
    inside_words = [f"iw{k}" for k in range(150)]
    outside_words = [f"w{k}" for k in range(1500)]

    sentences = []
    for s_idx, length in enumerate(_plan_lengths(n_sentences, n_tokens, first_sentence_tokens)):
        sent_id = f"{id_prefix}.{s_idx + 1:05d}"
        spans = _sample_spans(rng, length, span_probability)
        labels = spans_to_tags(spans, length, SchemeMode.IOB2)

        tokens = []
        for t_idx, label in enumerate(labels):
            if label.name == "B":
                word = opener_words[int(rng.integers(len(opener_words)))]
                parent = 0
            elif label.name == "I":
                word = inside_words[int(rng.integers(len(inside_words)))]
                parent = t_idx  # offset of the previous token in the MWE
            else:
                word = outside_words[int(rng.integers(len(outside_words)))]
                parent = 0
            if rng.random() < 0.15:
                word = word.capitalize()
            raw_tag = label.name
            if label.name != "O" and rng.random() < 0.2:
                raw_tag = raw_tag.lower()  # weak-MWE convention, folds back on parse
            supersense = ""
            if label.name == "B" and rng.random() < 0.1:
                supersense = _SUPERSENSES[int(rng.integers(len(_SUPERSENSES)))]
            tokens.append(
                Token(
                    offset=t_idx + 1,
                    word=word,
                    lemma=word.lower(),
                    pos=_POS_POOL[int(rng.integers(len(_POS_POOL)))],
                    mwe_tag_raw=raw_tag,
                    parent_offset=parent,
                    strength="_" if raw_tag in ("b", "i") else "",
                    supersense=supersense,
                    sentence_id=sent_id,
                )
            )
        sentences.append(Sentence(id=sent_id, tokens=tuple(tokens), labels=tuple(labels)))
    return Corpus(sentences=tuple(sentences), split_name=split_name)


def dimsum_sized_train(seed: int = 7) -> Corpus:
    """Synthetic stand-in matching the published train split size."""
    return synthetic_corpus(4800, 73826, seed=seed, split_name="train", id_prefix="tr")


def dimsum_sized_test(seed: int = 11) -> Corpus:
    """Synthetic stand-in matching the published raw test split size; the
    first sentence has 100 tokens so one exclusion lands on 999/16400."""
    return synthetic_corpus(
        1000, 16500, seed=seed, split_name="test", id_prefix="te", first_sentence_tokens=100
    )
