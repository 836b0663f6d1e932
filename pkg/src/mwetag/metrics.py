"""Token-level classification metrics plus span-level exact match.

All ratios follow the zero-denominator-is-zero convention, every class
counts toward the macro average regardless of support, and weighted
aggregates are support-weighted means of the per-class values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Label, N_LABELS
from .tagscheme import SchemeMode, tags_to_spans


class LengthMismatch(ValueError):
    def __init__(self, sentence_index: int, message: str):
        super().__init__(f"sentence {sentence_index}: {message}")
        self.sentence_index = sentence_index


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    per_class: dict[Label, ClassScores]
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    macro_f1: float
    confusion: np.ndarray  # (L, L) counts, rows gold, columns predicted
    n_tokens: int


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def evaluate_tokens(
    gold: Sequence[Sequence[Label]], pred: Sequence[Sequence[Label]]
) -> EvalReport:
    """Per-class precision/recall/F1 with weighted and macro aggregates."""
    if len(gold) != len(pred):
        raise LengthMismatch(-1, f"{len(gold)} gold sentences vs {len(pred)} predicted")
    confusion = np.zeros((N_LABELS, N_LABELS), dtype=np.int64)
    for idx, (g_seq, p_seq) in enumerate(zip(gold, pred)):
        if len(g_seq) != len(p_seq):
            raise LengthMismatch(idx, f"{len(g_seq)} gold labels vs {len(p_seq)} predicted")
        for g, p in zip(g_seq, p_seq):
            confusion[int(g), int(p)] += 1

    n_tokens = int(confusion.sum())
    per_class: dict[Label, ClassScores] = {}
    for label in Label:
        c = int(label)
        tp = int(confusion[c, c])
        support = int(confusion[c, :].sum())
        predicted = int(confusion[:, c].sum())
        precision = _ratio(tp, predicted)
        recall = _ratio(tp, support)
        f1 = _ratio(2.0 * precision * recall, precision + recall)
        per_class[label] = ClassScores(precision, recall, f1, support)

    weighted_precision = _ratio(
        sum(s.support * s.precision for s in per_class.values()), n_tokens
    )
    # Support-weighted recall telescopes to the token accuracy; computing
    # it from the integer diagonal keeps that identity exact in floats.
    weighted_recall = _ratio(float(np.trace(confusion)), n_tokens)
    weighted_f1 = _ratio(sum(s.support * s.f1 for s in per_class.values()), n_tokens)
    macro_f1 = sum(s.f1 for s in per_class.values()) / N_LABELS

    return EvalReport(
        per_class=per_class,
        weighted_precision=weighted_precision,
        weighted_recall=weighted_recall,
        weighted_f1=weighted_f1,
        macro_f1=macro_f1,
        confusion=confusion,
        n_tokens=n_tokens,
    )


def evaluate_spans(
    gold: Sequence[Sequence[Label]],
    pred: Sequence[Sequence[Label]],
    mode: SchemeMode = SchemeMode.IOB2,
) -> tuple[float, float, float]:
    """Exact-match span precision/recall/F1 (diagnostic, lenient parse)."""
    if len(gold) != len(pred):
        raise LengthMismatch(-1, f"{len(gold)} gold sentences vs {len(pred)} predicted")
    tp = n_gold = n_pred = 0
    for idx, (g_seq, p_seq) in enumerate(zip(gold, pred)):
        if len(g_seq) != len(p_seq):
            raise LengthMismatch(idx, f"{len(g_seq)} gold labels vs {len(p_seq)} predicted")
        g_spans = set(tags_to_spans(g_seq, mode))
        p_spans = set(tags_to_spans(p_seq, mode))
        tp += len(g_spans & p_spans)
        n_gold += len(g_spans)
        n_pred += len(p_spans)
    precision = _ratio(tp, n_pred)
    recall = _ratio(tp, n_gold)
    f1 = _ratio(2.0 * precision * recall, precision + recall)
    return precision, recall, f1


def report_to_json(report: EvalReport) -> str:
    """Stable-order JSON with every ratio printed at six decimals."""
    lines = ['{', '  "per_class": {']
    for pos, label in enumerate(Label):
        s = report.per_class[label]
        tail = "," if pos < N_LABELS - 1 else ""
        lines.append(
            f'    "{label.name}": {{"precision": {s.precision:.6f}, '
            f'"recall": {s.recall:.6f}, "f1": {s.f1:.6f}, "support": {s.support}}}{tail}'
        )
    lines.append("  },")
    lines.append(
        f'  "weighted": {{"precision": {report.weighted_precision:.6f}, '
        f'"recall": {report.weighted_recall:.6f}, "f1": {report.weighted_f1:.6f}}},'
    )
    lines.append(f'  "macro_f1": {report.macro_f1:.6f},')
    rows = ", ".join("[" + ", ".join(str(int(v)) for v in row) + "]" for row in report.confusion)
    lines.append(f'  "confusion": [{rows}],')
    lines.append(f'  "n_tokens": {report.n_tokens}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def report_from_json(text: str) -> EvalReport:
    """Rebuild a report from report_to_json output (6-decimal precision)."""
    import json

    data = json.loads(text)
    per_class = {
        Label[name]: ClassScores(
            precision=scores["precision"],
            recall=scores["recall"],
            f1=scores["f1"],
            support=scores["support"],
        )
        for name, scores in data["per_class"].items()
    }
    return EvalReport(
        per_class=per_class,
        weighted_precision=data["weighted"]["precision"],
        weighted_recall=data["weighted"]["recall"],
        weighted_f1=data["weighted"]["f1"],
        macro_f1=data["macro_f1"],
        confusion=np.asarray(data["confusion"], dtype=np.int64),
        n_tokens=data["n_tokens"],
    )
