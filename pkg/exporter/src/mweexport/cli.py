"""Command line for the embedding exporter."""

from __future__ import annotations

import argparse
import sys

from .export import ExportSpec, ModelLoadFailure, TokenizationMismatch, export
from .words import CorpusReadError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mwe-export",
        description="Export per-word contextual embeddings into the MWEE binary format",
    )
    parser.add_argument("--model", required=True, help="checkpoint name or local path")
    parser.add_argument("--corpus", required=True, help="tab-separated corpus file")
    parser.add_argument("--out", required=True, help="MWEE output path")
    parser.add_argument(
        "--pooling",
        choices=["first_subword", "mean_subwords"],
        default="first_subword",
        help="how to collapse subword states into one word vector",
    )
    parser.add_argument("--layer", type=int, default=-1, help="hidden-state layer, -1 = last")
    parser.add_argument("--batch-size", type=int, default=16)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExportSpec(
        model_name=args.model,
        corpus_path=args.corpus,
        output_path=args.out,
        pooling=args.pooling,
        layer=args.layer,
        batch_size=args.batch_size,
    )
    try:
        rows = export(spec)
    except (ModelLoadFailure, TokenizationMismatch, CorpusReadError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {rows} word vectors to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
