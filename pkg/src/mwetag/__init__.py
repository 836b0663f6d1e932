"""Multiword-expression sequence tagging on DiMSUM-format corpora."""

from .corpus import (
    Corpus,
    CorpusError,
    Label,
    Sentence,
    Token,
    corpus_stats,
    exclude_sentences,
    normalize_tag,
    parse_dimsum,
    read_dimsum_file,
    write_dimsum,
)
from .tagscheme import SchemeMode, Span, spans_to_tags, tags_to_spans, validate
from .metrics import EvalReport, evaluate_spans, evaluate_tokens, report_to_json
from .taggers import (
    TaggerModel,
    TrainConfig,
    load_model,
    predict,
    save_model,
    train_bilstm_crf,
    train_linear_head,
)

__version__ = "0.1.0"
