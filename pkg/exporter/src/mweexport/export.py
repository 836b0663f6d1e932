"""Frozen-feature extraction from pretrained transformer checkpoints.

Every corpus word gets one vector: the checkpoint runs in inference mode
over the pre-tokenized sentence, subword hidden states from the chosen
layer are grouped by source word, and either the first subword or the
subword mean represents the word.  The hidden size is taken from the
loaded checkpoint's config at run time, never hard-coded.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .mwee import write_mwee
from .words import read_sentences

POOLING_MODES = ("first_subword", "mean_subwords")


class ModelLoadFailure(RuntimeError):
    pass


class TokenizationMismatch(ValueError):
    def __init__(self, sentence_id: str, detail: str):
        super().__init__(f"sentence {sentence_id}: {detail}")
        self.sentence_id = sentence_id


@dataclass
class ExportSpec:
    model_name: str
    corpus_path: str
    output_path: str
    pooling: str = "first_subword"
    layer: int = -1
    batch_size: int = 16

    def __post_init__(self):
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _load_checkpoint(model_name: str):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_name)
        model = AutoModel.from_pretrained(model_name)
    except Exception as exc:
        raise ModelLoadFailure(f"cannot load checkpoint {model_name!r}: {exc}") from exc
    if not getattr(tokenizer, "is_fast", False):
        raise ModelLoadFailure(
            f"checkpoint {model_name!r} has no fast tokenizer; word alignment needs one"
        )
    model.eval()
    return tokenizer, model


def _pool_sentence(
    hidden: torch.Tensor, word_ids: list[int | None], n_words: int, pooling: str, sentence_id: str
) -> np.ndarray:
    """One row per word from the subword rows of a single sentence."""
    positions: list[list[int]] = [[] for _ in range(n_words)]
    for pos, word in enumerate(word_ids):
        if word is not None:
            positions[word].append(pos)
    rows = []
    for word, subwords in enumerate(positions):
        if not subwords:
            raise TokenizationMismatch(sentence_id, f"word {word} produced no subword tokens")
        if pooling == "first_subword":
            rows.append(hidden[subwords[0]])
        else:
            rows.append(hidden[subwords].mean(dim=0))
    return torch.stack(rows).to(torch.float32).numpy()


def export(spec: ExportSpec) -> int:
    """Write one MWEE entry per corpus sentence; returns the token count."""
    sentences = read_sentences(spec.corpus_path)
    tokenizer, model = _load_checkpoint(spec.model_name)
    hidden_size = int(model.config.hidden_size)

    n_layers = getattr(model.config, "num_hidden_layers", None)
    if n_layers is not None and not (-(n_layers + 1) <= spec.layer <= n_layers):
        raise ValueError(f"layer {spec.layer} outside the checkpoint's {n_layers + 1} hidden states")

    entries: list[tuple[int, np.ndarray]] = []
    total_rows = 0
    with torch.no_grad():
        for batch_start in range(0, len(sentences), spec.batch_size):
            batch = sentences[batch_start : batch_start + spec.batch_size]
            encoded = tokenizer(
                batch,
                is_split_into_words=True,
                padding=True,
                truncation=False,
                return_tensors="pt",
            )
            outputs = model(**encoded, output_hidden_states=True)
            layer_states = outputs.hidden_states[spec.layer]
            for offset, words in enumerate(batch):
                index = batch_start + offset
                vectors = _pool_sentence(
                    layer_states[offset],
                    encoded.word_ids(batch_index=offset),
                    len(words),
                    spec.pooling,
                    sentence_id=f"#{index}",
                )
                if vectors.shape != (len(words), hidden_size):
                    raise TokenizationMismatch(
                        f"#{index}", f"expected {len(words)} x {hidden_size}, got {vectors.shape}"
                    )
                entries.append((index, vectors))
                total_rows += vectors.shape[0]

    output = Path(spec.output_path)
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output, "wb") as fh:
        write_mwee(fh, hidden_size, entries)
    return total_rows
