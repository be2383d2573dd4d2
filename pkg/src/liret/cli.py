"""Command-line entry points for encoding, retrieval, and the experiments."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .encoder import EncoderConfig
from .evaluation import Judgments, RunList
from .index import TokenIndex, candidate_run_entries
from .pipeline import (
    SweepSpec,
    PhaseConfig,
    encode_query,
    heatmap_matrix,
    mask_sweep,
    maxlen_experiment,
    metric_report,
    remap_experiment,
    run_pipeline,
    swap_experiment,
    write_heatmap_csv,
    write_report_csv,
)
from .remap import RemapCondition
from .store import CorpusStore, StoredPassage, read_store, write_store
from .synth import SynthSpec, generate_dataset, read_queries_tsv, write_queries_tsv
from .tokens import FixedMaskCount, PadToTotalLength, Vocabulary


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--store", type=Path, help="corpus store file")
    parser.add_argument("--queries", type=Path, help="query TSV (qid<TAB>token ids)")
    parser.add_argument("--qrels", type=Path, help="TREC qrels file")
    parser.add_argument("--vocab", type=Path, help="vocabulary side-file")
    parser.add_argument("--seed", type=int, default=42, help="encoder seed")
    parser.add_argument("--dim", type=int, default=16, help="toy encoder dimensionality")
    parser.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="query worker threads")


def _policy(args) -> FixedMaskCount | PadToTotalLength:
    if args.mask_count is not None and args.total_length is not None:
        raise SystemExit("use either --mask-count or --total-length, not both")
    if args.mask_count is not None:
        return FixedMaskCount(args.mask_count)
    return PadToTotalLength(args.total_length if args.total_length is not None else 32)


def _add_policy(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mask-count", type=int, help="append exactly this many masks")
    parser.add_argument(
        "--total-length", type=int, help="pad with masks to this total length (default 32)"
    )


def _encoder_cfg(args) -> EncoderConfig:
    return EncoderConfig(dim=args.dim, seed=args.seed)


def _load_inputs(args, need_qrels: bool = False):
    if args.store is None or args.queries is None or args.vocab is None:
        raise SystemExit("--store, --queries, and --vocab are required")
    corpus = read_store(args.store)
    queries = read_queries_tsv(args.queries)
    vocab = Vocabulary.load(args.vocab)
    judgments = None
    if need_qrels:
        if args.qrels is None:
            raise SystemExit("--qrels is required")
        judgments = Judgments.from_trec(args.qrels)
    return corpus, queries, vocab, judgments


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        n_docs=args.docs,
        doc_len=args.doc_len,
        vocab_size=args.vocab_size,
        n_queries=args.n_queries,
        seed=args.seed,
    )
    corpus, queries, judgments, vocab = generate_dataset(spec, _encoder_cfg(args))
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_store(corpus, out / "corpus.liv")
    write_queries_tsv(queries, out / "queries.tsv")
    judgments.to_trec(out / "qrels.txt")
    vocab.save(out / "vocab.txt")
    print(
        f"wrote {len(corpus.passages)} docs ({corpus.total_tokens} tokens), "
        f"{len(queries)} queries, {len(judgments)} judgments to {out}"
    )
    return 0


def _cmd_encode(args) -> int:
    if args.queries is None or args.vocab is None or args.out is None:
        raise SystemExit("--queries, --vocab, and --out are required")
    queries = read_queries_tsv(args.queries)
    vocab = Vocabulary.load(args.vocab)
    specials = vocab.special_tokens()
    cfg = _encoder_cfg(args)
    policy = _policy(args)
    remap_cond = RemapCondition(args.remap)
    passages = []
    for qid, ids in queries:
        if not qid.isdigit():
            raise SystemExit(f"query id {qid!r} is not numeric; stores need u32 ids")
        seq, emb = encode_query(ids, policy, cfg, specials, remap_cond)
        passages.append(StoredPassage(int(qid), seq.ids_array(), emb))
    write_store(CorpusStore(cfg.dim, passages), args.out)
    print(f"encoded {len(passages)} queries to {args.out}")
    return 0


def _cmd_index(args) -> int:
    if args.store is None:
        raise SystemExit("--store is required")
    corpus = read_store(args.store)
    index = TokenIndex.from_store(corpus)
    print(
        f"{len(corpus.passages)} passages, {index.total_tokens} token vectors, "
        f"dim {corpus.dim}"
    )
    return 0


def _cmd_retrieve(args) -> int:
    corpus, queries, vocab, _ = _load_inputs(args)
    index = TokenIndex.from_store(corpus)
    specials = vocab.special_tokens()
    cfg = _encoder_cfg(args)
    policy = _policy(args)
    run = RunList()
    for qid, ids in queries:
        _, emb = encode_query(ids, policy, cfg, specials)
        entries = candidate_run_entries(emb, args.k_per_token, index)
        run.set_query(qid, [(str(d), s) for d, s in entries])
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / "candidates.run"
    run.to_trec(out, tag="liret-setretrieval")
    print(f"wrote candidate run to {out}")
    return 0


def _cmd_rerank(args) -> int:
    corpus, queries, vocab, _ = _load_inputs(args)
    index = TokenIndex.from_store(corpus)
    run = run_pipeline(
        queries,
        corpus,
        index,
        modified_policy=_policy(args),
        modified_remap=RemapCondition(args.remap),
        phase=PhaseConfig(args.phase),
        k_per_token=args.k_per_token,
        rerank_cutoff=args.cutoff,
        encoder_cfg=_encoder_cfg(args),
        specials=vocab.special_tokens(),
        workers=args.workers,
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / "reranked.run"
    run.to_trec(out)
    print(f"wrote run to {out}")
    return 0


def _cmd_remap_exp(args) -> int:
    corpus, queries, vocab, judgments = _load_inputs(args, need_qrels=True)
    index = TokenIndex.from_store(corpus)
    rows = remap_experiment(
        queries,
        corpus,
        index,
        judgments,
        k_per_token=args.k_per_token,
        rerank_cutoff=args.cutoff,
        encoder_cfg=_encoder_cfg(args),
        specials=vocab.special_tokens(),
        workers=args.workers,
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / "remap_experiment.csv"
    write_report_csv(out, rows)
    print(f"wrote {out}")
    return 0


def _cmd_swap_exp(args) -> int:
    if args.queries is None or args.vocab is None:
        raise SystemExit("--queries and --vocab are required")
    queries = read_queries_tsv(args.queries)
    vocab = Vocabulary.load(args.vocab)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, required in (("shift_report.csv", True), ("shift_report_unrestricted.csv", False)):
        rows = swap_experiment(
            queries,
            vocab,
            require_what_is=required,
            encoder_cfg=_encoder_cfg(args),
            specials=vocab.special_tokens(),
        )
        write_report_csv(args.out_dir / name, rows, ["query_id", "slot", "distance"])
        print(f"wrote {args.out_dir / name} ({len(rows)} rows)")
    return 0


def _cmd_mask_sweep(args) -> int:
    corpus, queries, vocab, judgments = _load_inputs(args, need_qrels=True)
    index = TokenIndex.from_store(corpus)
    sweep = SweepSpec.from_json(args.config) if args.config else SweepSpec()
    if args.counts:
        lo, hi, step = (int(v) for v in args.counts.split(":"))
        sweep = SweepSpec(
            mask_counts=tuple(range(lo, hi, step)),
            total_lengths=sweep.total_lengths,
            remap=sweep.remap,
            phase=sweep.phase,
            k_per_token=sweep.k_per_token,
            rerank_cutoff=sweep.rerank_cutoff,
        )
    rows = mask_sweep(
        queries,
        corpus,
        index,
        judgments,
        sweep,
        encoder_cfg=_encoder_cfg(args),
        specials=vocab.special_tokens(),
        workers=args.workers,
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / "mask_sweep.csv"
    write_report_csv(out, rows)
    print(f"wrote {out} ({len(rows)} sweep points)")
    return 0


def _cmd_maxlen_exp(args) -> int:
    corpus, queries, vocab, judgments = _load_inputs(args, need_qrels=True)
    index = TokenIndex.from_store(corpus)
    lengths = tuple(int(v) for v in args.lengths.split(","))
    rows = maxlen_experiment(
        queries,
        corpus,
        index,
        judgments,
        total_lengths=lengths,
        k_per_token=args.k_per_token,
        rerank_cutoff=args.cutoff,
        encoder_cfg=_encoder_cfg(args),
        specials=vocab.special_tokens(),
        workers=args.workers,
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / "maxlen_experiment.csv"
    write_report_csv(out, rows)
    print(f"wrote {out}")
    return 0


def _cmd_heatmap(args) -> int:
    if args.queries is None or args.vocab is None:
        raise SystemExit("--queries and --vocab are required")
    queries = read_queries_tsv(args.queries)
    vocab = Vocabulary.load(args.vocab)
    if args.qid is not None:
        queries = [(qid, ids) for qid, ids in queries if qid == args.qid]
        if not queries:
            raise SystemExit(f"query id {args.qid} not found")
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for qid, ids in queries:
        matrix, seq = heatmap_matrix(
            ids,
            args.positions,
            encoder_cfg=_encoder_cfg(args),
            specials=vocab.special_tokens(),
        )
        out = args.out_dir / f"heatmap_{qid}.csv"
        write_heatmap_csv(matrix, seq, vocab, out)
        print(f"wrote {out}")
    return 0


def _cmd_eval(args) -> int:
    if args.run is None or args.qrels is None:
        raise SystemExit("--run and --qrels are required")
    run = RunList.from_trec(args.run)
    judgments = Judgments.from_trec(args.qrels)
    baseline = RunList.from_trec(args.baseline_run) if args.baseline_run else None
    rows = metric_report(
        run,
        judgments,
        condition=args.condition,
        baseline_run=baseline,
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / "metrics.csv"
    write_report_csv(out, rows)
    for row in rows:
        print(f"{row['metric']}: {row['mean']:.4f}")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liret", description="late-interaction retrieval engine and experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(handler=handler)
        return p

    p = add("synth", _cmd_synth, "generate the seeded synthetic corpus")
    p.add_argument("--docs", type=int, default=1000)
    p.add_argument("--doc-len", type=int, default=20)
    p.add_argument("--vocab-size", type=int, default=500)
    p.add_argument("--n-queries", type=int, default=32)

    p = add("encode", _cmd_encode, "encode queries into a store file")
    _add_policy(p)
    p.add_argument("--remap", choices=[c.value for c in RemapCondition], default="none")
    p.add_argument("--out", type=Path, help="output store path")

    add("index", _cmd_index, "load a store and print index statistics")

    p = add("retrieve", _cmd_retrieve, "first-phase candidate retrieval to a run file")
    _add_policy(p)
    p.add_argument("--k-per-token", type=int, default=1000)

    p = add("rerank", _cmd_rerank, "full two-phase retrieval to a run file")
    _add_policy(p)
    p.add_argument("--remap", choices=[c.value for c in RemapCondition], default="none")
    p.add_argument("--phase", choices=[c.value for c in PhaseConfig], default="both")
    p.add_argument("--k-per-token", type=int, default=1000)
    p.add_argument("--cutoff", type=int, default=1000)

    p = add("remap-exp", _cmd_remap_exp, "structural-token remapping experiment")
    p.add_argument("--k-per-token", type=int, default=1000)
    p.add_argument("--cutoff", type=int, default=1000)

    add("swap-exp", _cmd_swap_exp, "token-reorder embedding shift experiment")

    p = add("mask-sweep", _cmd_mask_sweep, "sweep the number of appended masks")
    p.add_argument("--counts", help="lo:hi:step range override, e.g. 0:97:2")
    p.add_argument("--config", type=Path, help="JSON sweep configuration")

    p = add("maxlen-exp", _cmd_maxlen_exp, "total query length experiment")
    p.add_argument("--lengths", default="32,128")
    p.add_argument("--k-per-token", type=int, default=1000)
    p.add_argument("--cutoff", type=int, default=1000)

    p = add("heatmap", _cmd_heatmap, "position-vs-token cosine heatmap CSVs")
    p.add_argument("--positions", type=int, default=65)
    p.add_argument("--qid", help="restrict to one query id")

    p = add("eval", _cmd_eval, "evaluate a TREC run against qrels")
    p.add_argument("--run", type=Path)
    p.add_argument("--baseline-run", type=Path)
    p.add_argument("--condition", default="run")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
