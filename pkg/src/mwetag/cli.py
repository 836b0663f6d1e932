"""Command-line interface: stats, train, predict, evaluate.

Configuration comes from flat ``key = value`` files (``#`` starts a
comment line, strings are unquoted, unknown keys are hard errors);
command-line flags override file values.  Exit codes: 0 success, 2
input/config error, 3 runtime training failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import embedio, metrics, taggers
from .corpus import (
    Corpus,
    CorpusError,
    corpus_stats,
    exclude_sentences,
    read_dimsum_file,
)
from .neuralnet import BadMagic, CorruptPayload, VersionUnsupported
from .tagscheme import SchemeMode, validate
from .taggers import NonFiniteLoss, TaggerModel, TrainConfig

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TRAINING = 3


class ConfigError(ValueError):
    pass


_PATH_KEYS = ("train_file", "test_file", "embeddings_file", "model_file", "report_file", "output_file")
_INT_KEYS = ("epochs", "batch_size", "seed", "hidden_size", "embed_dim")
_FLOAT_KEYS = ("learning_rate", "warmup_fraction", "clip_norm")
_KNOWN_KEYS = frozenset(
    ("model_kind", "scheme", "decay", "exclude_ids", "strict_iob")
    + _PATH_KEYS
    + _INT_KEYS
    + _FLOAT_KEYS
)


@dataclass
class RunConfig:
    train: TrainConfig | None = None
    train_file: str | None = None
    test_file: str | None = None
    embeddings_file: str | None = None
    model_file: str | None = None
    report_file: str | None = None
    output_file: str | None = None
    exclude_ids: list[str] = field(default_factory=list)
    strict_iob: bool = False
    scheme: SchemeMode = SchemeMode.IOB2


def parse_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {stripped!r}")
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
        values[key] = value
    return values


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def build_run_config(values: dict[str, str], args: argparse.Namespace) -> RunConfig:
    """Merge config-file values with command-line overrides."""
    run = RunConfig()
    train_overrides: dict = {}
    for key, value in values.items():
        try:
            if key in _PATH_KEYS:
                setattr(run, key, value)
            elif key in _INT_KEYS:
                train_overrides[key] = int(value)
            elif key in _FLOAT_KEYS:
                train_overrides[key] = float(value)
            elif key == "model_kind" or key == "decay":
                train_overrides[key] = value
            elif key == "scheme":
                run.scheme = SchemeMode(value)
                train_overrides["scheme"] = run.scheme
            elif key == "exclude_ids":
                run.exclude_ids = [x.strip() for x in value.split(",") if x.strip()]
            elif key == "strict_iob":
                run.strict_iob = _parse_bool(value, key)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    if train_overrides:
        kind = train_overrides.pop("model_kind", None)
        if kind is None:
            raise ConfigError("config sets training keys but no model_kind")
        try:
            if kind == "bilstm_crf":
                run.train = TrainConfig.bilstm_crf(**train_overrides)
            elif kind == "linear_head":
                run.train = TrainConfig.linear_head(**train_overrides)
            else:
                raise ConfigError(f"unknown model_kind {kind!r}")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # Command-line overrides.
    if getattr(args, "seed", None) is not None and run.train is not None:
        run.train = replace(run.train, seed=args.seed)
    if getattr(args, "exclude_ids", None):
        run.exclude_ids = [x.strip() for x in args.exclude_ids.split(",") if x.strip()]
    if getattr(args, "strict_iob", False):
        run.strict_iob = True
    if getattr(args, "scheme", None):
        run.scheme = SchemeMode(args.scheme)
    return run


def _load_corpus(path: str, run: RunConfig) -> Corpus:
    corpus = read_dimsum_file(path)
    if run.exclude_ids:
        corpus = exclude_sentences(corpus, run.exclude_ids)
    if run.strict_iob:
        for sentence in corpus.sentences:
            violations = validate(sentence.labels, run.scheme)
            if violations:
                v = violations[0]
                raise CorpusError(
                    f"sentence {sentence.id}: {v.reason} at position {v.position} "
                    f"(scheme {run.scheme.value})"
                )
    return corpus


def cmd_stats(args: argparse.Namespace) -> int:
    run = build_run_config(parse_config_file(args.config) if args.config else {}, args)
    corpus = _load_corpus(args.corpus, run)
    n_sentences, n_tokens, histogram = corpus_stats(corpus)
    print(f"{n_sentences} sentences, {n_tokens} tokens")
    print("labels: " + " ".join(f"{label.name}={histogram[label]}" for label in histogram))
    return EXIT_OK


def _require(value, name: str):
    if not value:
        raise ConfigError(f"missing required setting {name!r}")
    return value


def _derived_path(base: str, suffix: str) -> Path:
    p = Path(base)
    return p.parent / (p.stem + suffix)


def cmd_train(args: argparse.Namespace) -> int:
    if not args.config:
        raise ConfigError("train needs --config")
    run = build_run_config(parse_config_file(args.config), args)
    if run.train is None:
        raise ConfigError("config must set model_kind and training keys")
    train_file = _require(run.train_file, "train_file")
    model_file = _require(run.model_file, "model_file")

    corpus = _load_corpus(train_file, run)
    if run.train.model_kind == "bilstm_crf":
        model, trace = taggers.train_bilstm_crf(corpus, run.train)
    else:
        embeddings_file = _require(run.embeddings_file, "embeddings_file")
        with open(embeddings_file, "rb") as fh:
            efile = embedio.read_embeddings(fh)
        joined = embedio.join(corpus, efile)
        if joined.missing:
            print(f"warning: {joined.missing} corpus sentences missing from embeddings", file=sys.stderr)
        model, trace = taggers.train_linear_head(joined.pairs, run.train)

    with open(model_file, "wb") as fh:
        taggers.save_model(model, fh)
    trace_path = _derived_path(model_file, ".trace.tsv")
    with open(trace_path, "w", encoding="utf-8") as fh:
        for epoch, loss in enumerate(trace, start=1):
            fh.write(f"{epoch}\t{loss:.10f}\n")
    curve_path = _derived_path(model_file, ".loss.png")
    from . import plots

    plots.save_loss_curve(trace, curve_path, title=f"{run.train.model_kind} training")
    print(
        f"trained {run.train.model_kind} on {len(corpus)} sentences; "
        f"final mean loss {trace[-1]:.6f}"
    )
    print(f"wrote {model_file}, {trace_path}, {curve_path}")
    return EXIT_OK


def _load_model(path: str) -> TaggerModel:
    with open(path, "rb") as fh:
        return taggers.load_model(fh)


def _predict_corpus(
    model: TaggerModel, corpus: Corpus, embeddings_file: str | None
) -> dict[str, list]:
    """Predicted labels per sentence id; linear heads skip sentences the
    embedding file does not cover."""
    predictions: dict[str, list] = {}
    if model.model_kind == "bilstm_crf":
        for sentence in corpus.sentences:
            predictions[sentence.id] = taggers.predict(model, sentence)
    else:
        path = _require(embeddings_file, "embeddings_file")
        with open(path, "rb") as fh:
            efile = embedio.read_embeddings(fh)
        joined = embedio.join(corpus, efile)
        if joined.missing:
            print(f"warning: {joined.missing} corpus sentences missing from embeddings", file=sys.stderr)
        for sentence, vectors in joined.pairs:
            predictions[sentence.id] = taggers.predict(model, sentence, vectors)
    return predictions


def cmd_predict(args: argparse.Namespace) -> int:
    run = build_run_config(parse_config_file(args.config) if args.config else {}, args)
    model_file = args.model or _require(run.model_file, "model_file")
    input_file = args.input or _require(run.test_file, "test_file")
    output_file = args.out or _require(run.output_file, "output_file")
    embeddings_file = args.embeddings or run.embeddings_file

    model = _load_model(model_file)
    full = read_dimsum_file(input_file)  # alignment uses unexcluded positions
    target_ids = {s.id for s in full.sentences}
    if run.exclude_ids:
        target_ids -= set(run.exclude_ids)
    predictions = _predict_corpus(model, full, embeddings_file)

    text = Path(input_file).read_text(encoding="utf-8")
    out_lines = []
    sentence_pos = -1
    at_sentence_start = True
    token_pos = 0
    for line in text.splitlines():
        if not line:
            at_sentence_start = True
            out_lines.append(line)
            continue
        if at_sentence_start:
            sentence_pos += 1
            token_pos = 0
            at_sentence_start = False
        sentence = full.sentences[sentence_pos]
        fields = line.split("\t")
        if sentence.id in target_ids and sentence.id in predictions:
            fields[4] = predictions[sentence.id][token_pos].name
        token_pos += 1
        out_lines.append("\t".join(fields))
    Path(output_file).write_text("\n".join(out_lines) + "\n", encoding="utf-8")
    print(f"wrote {output_file}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    run = build_run_config(parse_config_file(args.config) if args.config else {}, args)
    model_file = args.model or _require(run.model_file, "model_file")
    test_file = args.test or _require(run.test_file, "test_file")
    report_file = args.report or _require(run.report_file, "report_file")
    embeddings_file = args.embeddings or run.embeddings_file

    model = _load_model(model_file)
    corpus = _load_corpus(test_file, run)

    gold = []
    pred = []
    if model.model_kind == "bilstm_crf":
        for sentence in corpus.sentences:
            gold.append(sentence.labels)
            pred.append(taggers.predict(model, sentence))
    else:
        path = _require(embeddings_file, "embeddings_file")
        with open(path, "rb") as fh:
            efile = embedio.read_embeddings(fh)
        joined = embedio.join(corpus, efile)
        if joined.missing:
            print(f"warning: {joined.missing} corpus sentences missing from embeddings", file=sys.stderr)
        for sentence, vectors in joined.pairs:
            gold.append(sentence.labels)
            pred.append(taggers.predict(model, sentence, vectors))

    report = metrics.evaluate_tokens(gold, pred)
    Path(report_file).write_text(metrics.report_to_json(report), encoding="utf-8")
    confusion_path = _derived_path(report_file, ".confusion.png")
    from . import plots

    plots.save_confusion_heatmap(report, confusion_path)
    print(
        f"weighted_recall={report.weighted_recall:.4f} "
        f"weighted_precision={report.weighted_precision:.4f} "
        f"weighted_f1={report.weighted_f1:.4f} "
        f"macro_f1={report.macro_f1:.4f}"
    )
    print(f"wrote {report_file}, {confusion_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="flat key = value config file")
    shared.add_argument("--seed", type=int, help="override the config seed")
    shared.add_argument("--exclude-ids", dest="exclude_ids", help="comma-separated sentence ids to drop")
    shared.add_argument("--strict-iob", dest="strict_iob", action="store_true", help="reject scheme violations")
    shared.add_argument("--scheme", choices=[m.value for m in SchemeMode], help="tag scheme (default iob2)")

    parser = argparse.ArgumentParser(prog="mwetag", description="Multiword-expression sequence tagging toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", parents=[shared], help="corpus size and label histogram")
    p_stats.add_argument("corpus", help="tab-separated corpus file")
    p_stats.set_defaults(func=cmd_stats)

    p_train = sub.add_parser("train", parents=[shared], help="train a tagger from a config file")
    p_train.set_defaults(func=cmd_train)

    p_predict = sub.add_parser("predict", parents=[shared], help="rewrite a corpus with predicted tags")
    p_predict.add_argument("--model", help="trained model file")
    p_predict.add_argument("--input", help="corpus file to annotate")
    p_predict.add_argument("--out", help="output corpus path")
    p_predict.add_argument("--embeddings", help="MWEE file (linear_head models)")
    p_predict.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("evaluate", parents=[shared], help="score a model on a gold corpus")
    p_eval.add_argument("--model", help="trained model file")
    p_eval.add_argument("--test", help="gold corpus file")
    p_eval.add_argument("--report", help="JSON report output path")
    p_eval.add_argument("--embeddings", help="MWEE file (linear_head models)")
    p_eval.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (
        ConfigError,
        CorpusError,
        embedio.EmbeddingFormatError,
        embedio.TokenCountMismatch,
        BadMagic,
        VersionUnsupported,
        CorruptPayload,
        taggers.EmptyCorpus,
        taggers.EmptyDataset,
        taggers.DimMismatch,
        FileNotFoundError,
        IsADirectoryError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
