"""Command-line surface for the checkpoint exporter."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import ExportSpec, export_collection, export_queries


def _spec_from_args(args) -> ExportSpec:
    return ExportSpec(
        checkpoint=args.checkpoint,
        output=args.out,
        queries=getattr(args, "queries", None),
        collection=getattr(args, "collection", None),
        mask_count=getattr(args, "mask_count", None),
        total_length=getattr(args, "total_length", None),
        batch_size=args.batch_size,
        doc_maxlen=getattr(args, "doc_maxlen", 180),
        filter_punctuation=getattr(args, "filter_punctuation", False),
        vocab_out=args.vocab_out,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="livexport",
        description="export token embeddings from a retrieval checkpoint into LIV1 stores",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("queries", help="encode queries with mask augmentation")
    q.add_argument("--checkpoint", required=True, help="checkpoint directory")
    q.add_argument("--queries", type=Path, required=True, help="TSV of qid<TAB>text")
    q.add_argument("--out", type=Path, required=True, help="output store path")
    q.add_argument("--mask-count", type=int, help="append exactly this many masks")
    q.add_argument("--total-length", type=int, help="pad to this total length (default 32)")
    q.add_argument("--batch-size", type=int, default=32)
    q.add_argument("--vocab-out", type=Path, help="also write the vocabulary side-file")
    q.set_defaults(run=lambda a: export_queries(_spec_from_args(a)))

    c = sub.add_parser("collection", help="encode documents")
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--collection", type=Path, required=True, help="TSV of docid<TAB>text")
    c.add_argument("--out", type=Path, required=True)
    c.add_argument("--batch-size", type=int, default=32)
    c.add_argument("--doc-maxlen", type=int, default=180)
    c.add_argument("--filter-punctuation", action="store_true")
    c.add_argument("--vocab-out", type=Path)
    c.set_defaults(run=lambda a: export_collection(_spec_from_args(a)))

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        written = args.run(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {written} passages to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
