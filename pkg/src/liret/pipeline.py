"""Two-phase retrieval runs and the experiment drivers behind the CLI.

A run encodes each query twice when needed: once in its baseline 32-token
form and once in the modified form under study (different mask budget, total
length, or remap condition). The phase setting controls which form feeds
candidate retrieval and which feeds reranking.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from .encoder import EmbeddingMatrix, EncoderConfig, contextualize
from .evaluation import Judgments, RunList, bonferroni, paired_t_test
from .index import TokenIndex, candidate_set
from .perturb import shift_report, similarity_heatmap
from .remap import RemapCondition, remap
from .scoring import rerank
from .store import CorpusStore
from .tokens import (
    FixedMaskCount,
    MaskPolicy,
    PadToTotalLength,
    SpecialTokens,
    TokenSeq,
    Vocabulary,
    build_attention_mask,
    build_query_input,
    swap_first_two_to_end,
    swap_what_is,
)

Query = tuple[str, tuple[int, ...]]
RerankFn = Callable[[EmbeddingMatrix, object, CorpusStore, int], list[tuple[int, float]]]

BASELINE_TOTAL_LENGTH = 32


class PhaseConfig(enum.Enum):
    SET_RETRIEVAL_ONLY = "set-retrieval"
    RERANK_ONLY = "rerank"
    BOTH = "both"


@dataclass(frozen=True)
class SweepSpec:
    mask_counts: tuple[int, ...] = tuple(range(0, 97, 2))
    total_lengths: tuple[int, ...] = (32, 128)
    remap: RemapCondition = RemapCondition.NONE
    phase: PhaseConfig = PhaseConfig.BOTH
    k_per_token: int = 1000
    rerank_cutoff: int = 1000

    def __post_init__(self) -> None:
        if not self.mask_counts or not self.total_lengths:
            raise ValueError("sweep lists must be non-empty")
        if min(self.mask_counts) < 0 or min(self.total_lengths) < 0:
            raise ValueError("sweep values must be >= 0")
        if self.k_per_token < 1 or self.rerank_cutoff < 0:
            raise ValueError("k_per_token must be >= 1 and rerank_cutoff >= 0")

    @classmethod
    def from_json(cls, path) -> "SweepSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        spec = cls()
        fields = {}
        if "mask_counts" in raw:
            fields["mask_counts"] = tuple(int(v) for v in raw["mask_counts"])
        if "total_lengths" in raw:
            fields["total_lengths"] = tuple(int(v) for v in raw["total_lengths"])
        if "remap" in raw:
            fields["remap"] = RemapCondition(raw["remap"])
        if "phase" in raw:
            fields["phase"] = PhaseConfig(raw["phase"])
        if "k_per_token" in raw:
            fields["k_per_token"] = int(raw["k_per_token"])
        if "rerank_cutoff" in raw:
            fields["rerank_cutoff"] = int(raw["rerank_cutoff"])
        return replace(spec, **fields)


def encode_query(
    token_ids: Sequence[int],
    policy: MaskPolicy,
    encoder_cfg: EncoderConfig,
    specials: SpecialTokens,
    remap_cond: RemapCondition = RemapCondition.NONE,
) -> tuple[TokenSeq, EmbeddingMatrix]:
    seq = build_query_input(token_ids, policy, specials)
    emb = contextualize(seq, build_attention_mask(seq), encoder_cfg)
    return seq, remap(emb, remap_cond)


def run_pipeline(
    queries: Sequence[Query],
    corpus: CorpusStore,
    index: TokenIndex,
    *,
    modified_policy: MaskPolicy,
    modified_remap: RemapCondition = RemapCondition.NONE,
    baseline_policy: MaskPolicy = PadToTotalLength(BASELINE_TOTAL_LENGTH),
    phase: PhaseConfig = PhaseConfig.BOTH,
    k_per_token: int = 1000,
    rerank_cutoff: int = 1000,
    encoder_cfg: EncoderConfig = EncoderConfig(),
    specials: SpecialTokens = SpecialTokens(),
    workers: int = 1,
    rerank_fn: Optional[RerankFn] = None,
) -> RunList:
    """Retrieve-then-rerank every query under the chosen phase wiring.

    SET_RETRIEVAL_ONLY feeds the modified form to candidate retrieval and the
    baseline form to reranking; RERANK_ONLY is the reverse; BOTH modifies
    both phases. ``rerank_fn`` exists so tests can substitute a passthrough
    scorer.
    """
    score = rerank_fn or rerank

    def one(query: Query) -> tuple[str, list[tuple[int, float]]]:
        qid, ids = query
        _, modified = encode_query(ids, modified_policy, encoder_cfg, specials, modified_remap)
        if phase is PhaseConfig.BOTH:
            retrieval_emb = rank_emb = modified
        else:
            _, baseline = encode_query(ids, baseline_policy, encoder_cfg, specials)
            if phase is PhaseConfig.SET_RETRIEVAL_ONLY:
                retrieval_emb, rank_emb = modified, baseline
            else:
                retrieval_emb, rank_emb = baseline, modified
        cands = candidate_set(retrieval_emb, k_per_token, index)
        return qid, score(rank_emb, cands, corpus, rerank_cutoff)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, queries))
    else:
        results = [one(q) for q in queries]

    run = RunList()
    for qid, entries in results:
        run.set_query(qid, [(str(d), s) for d, s in entries])
    return run


# Metric tables. Each entry is (column name, fn(run, judgments) -> per-query dict).


def _metric_fns(names: Sequence[str]):
    from . import evaluation as ev

    table = {
        "map_rel1": lambda r, j: ev.map_metric(r, j, 1),
        "mrr_rel1_at10": lambda r, j: ev.mrr_at_k(r, j, 10, 1),
        "map_rel2": lambda r, j: ev.map_metric(r, j, 2),
        "mrr_rel2_at10": lambda r, j: ev.mrr_at_k(r, j, 10, 2),
        "map_rel3": lambda r, j: ev.map_metric(r, j, 3),
        "mrr_rel3_at10": lambda r, j: ev.mrr_at_k(r, j, 10, 3),
        "ndcg_at10": lambda r, j: ev.ndcg_at_k(r, j, 10),
        "ndcg_at1000": lambda r, j: ev.ndcg_at_k(r, j, 1000),
        "recall_rel1_at50": lambda r, j: ev.recall_at_k(r, j, 50, 1),
        "recall_rel1_at1000": lambda r, j: ev.recall_at_k(r, j, 1000, 1),
    }
    return [(n, table[n]) for n in names]


SWEEP_METRICS = ("ndcg_at10", "ndcg_at1000", "mrr_rel2_at10", "map_rel2")
TABLE_METRICS = (
    "map_rel1",
    "mrr_rel1_at10",
    "map_rel2",
    "mrr_rel2_at10",
    "map_rel3",
    "mrr_rel3_at10",
    "ndcg_at10",
    "ndcg_at1000",
)
EVAL_METRICS = TABLE_METRICS + ("recall_rel1_at50", "recall_rel1_at1000")


def _metric_vectors(run: RunList, judgments: Judgments, names: Sequence[str], qids):
    vectors = {}
    for name, fn in _metric_fns(names):
        per_query = fn(run, judgments)
        vectors[name] = [per_query[q] for q in qids]
    return vectors


def _mean(values) -> float:
    return sum(values) / len(values) if values else 0.0


def mask_sweep(
    queries: Sequence[Query],
    corpus: CorpusStore,
    index: TokenIndex,
    judgments: Judgments,
    sweep: SweepSpec = SweepSpec(),
    *,
    encoder_cfg: EncoderConfig = EncoderConfig(),
    specials: SpecialTokens = SpecialTokens(),
    alpha: float = 0.05,
    workers: int = 1,
) -> list[dict]:
    """One row per mask count with mean metrics and significance vs baseline.

    The baseline is the standard 32-total-token query form; the row whose
    realized mean length is closest to 32 is flagged as its analogue.
    """
    qids = [q[0] for q in queries]
    common = dict(
        k_per_token=sweep.k_per_token,
        rerank_cutoff=sweep.rerank_cutoff,
        encoder_cfg=encoder_cfg,
        specials=specials,
        workers=workers,
    )
    baseline_run = run_pipeline(
        queries,
        corpus,
        index,
        modified_policy=PadToTotalLength(BASELINE_TOTAL_LENGTH),
        phase=PhaseConfig.BOTH,
        **common,
    )
    baseline_vecs = _metric_vectors(baseline_run, judgments, SWEEP_METRICS, qids)

    mean_base_len = _mean([len(ids) + 3 for _, ids in queries])
    rows = []
    tests = []
    for count in sweep.mask_counts:
        run = run_pipeline(
            queries,
            corpus,
            index,
            modified_policy=FixedMaskCount(count),
            modified_remap=sweep.remap,
            phase=sweep.phase,
            **common,
        )
        vecs = _metric_vectors(run, judgments, SWEEP_METRICS, qids)
        row = {
            "mask_count": count,
            "avg_query_len": mean_base_len + count,
            "n_queries": len(qids),
        }
        for name in SWEEP_METRICS:
            row[name] = _mean(vecs[name])
            sig = paired_t_test(vecs[name], baseline_vecs[name], alpha)
            row[f"t_{name}"] = sig.t_statistic
            row[f"p_{name}"] = sig.p_value
            tests.append((len(rows), name, sig.p_value))
        rows.append(row)

    family = bonferroni([p for _, _, p in tests], alpha)
    for (row_i, name, _), result in zip(tests, family):
        rows[row_i][f"sig_{name}"] = result.significant
    m = len(tests)
    nearest = min(range(len(rows)), key=lambda i: abs(rows[i]["avg_query_len"] - 32))
    for i, row in enumerate(rows):
        row["baseline_analogue"] = i == nearest
        row["bonferroni_m"] = m
        row["adjusted_alpha"] = family[0].adjusted_alpha
    return rows


def remap_experiment(
    queries: Sequence[Query],
    corpus: CorpusStore,
    index: TokenIndex,
    judgments: Judgments,
    *,
    policy: MaskPolicy = PadToTotalLength(BASELINE_TOTAL_LENGTH),
    phase: PhaseConfig = PhaseConfig.BOTH,
    k_per_token: int = 1000,
    rerank_cutoff: int = 1000,
    encoder_cfg: EncoderConfig = EncoderConfig(),
    specials: SpecialTokens = SpecialTokens(),
    alpha: float = 0.05,
    workers: int = 1,
) -> list[dict]:
    """Eight metric rows by four remap-condition columns, daggered vs none."""
    qids = [q[0] for q in queries]
    conditions = list(RemapCondition)
    vecs_by_cond = {}
    for cond in conditions:
        run = run_pipeline(
            queries,
            corpus,
            index,
            modified_policy=policy,
            modified_remap=cond,
            phase=phase,
            k_per_token=k_per_token,
            rerank_cutoff=rerank_cutoff,
            encoder_cfg=encoder_cfg,
            specials=specials,
            workers=workers,
        )
        vecs_by_cond[cond] = _metric_vectors(run, judgments, TABLE_METRICS, qids)

    tests = []
    for name in TABLE_METRICS:
        for cond in conditions[1:]:
            sig = paired_t_test(
                vecs_by_cond[cond][name], vecs_by_cond[RemapCondition.NONE][name], alpha
            )
            tests.append((name, cond, sig))
    family = bonferroni([s.p_value for _, _, s in tests], alpha)
    flags = {
        (name, cond): result.significant
        for (name, cond, _), result in zip(tests, family)
    }
    p_values = {(name, cond): sig.p_value for name, cond, sig in tests}

    rows = []
    for name in TABLE_METRICS:
        row = {"metric": name, "none": _mean(vecs_by_cond[RemapCondition.NONE][name])}
        for cond in conditions[1:]:
            col = cond.value.replace("-", "_")
            row[col] = _mean(vecs_by_cond[cond][name])
            row[f"p_{col}"] = p_values[(name, cond)]
            row[f"sig_{col}"] = flags[(name, cond)]
        row["bonferroni_m"] = len(tests)
        row["adjusted_alpha"] = family[0].adjusted_alpha
        rows.append(row)
    return rows


def maxlen_experiment(
    queries: Sequence[Query],
    corpus: CorpusStore,
    index: TokenIndex,
    judgments: Judgments,
    *,
    total_lengths: Sequence[int] = (32, 128),
    k_per_token: int = 1000,
    rerank_cutoff: int = 1000,
    encoder_cfg: EncoderConfig = EncoderConfig(),
    specials: SpecialTokens = SpecialTokens(),
    alpha: float = 0.05,
    workers: int = 1,
) -> list[dict]:
    """nDCG@10/@1000 per (phase, total length), daggered against length 32."""
    metrics = ("ndcg_at10", "ndcg_at1000")
    qids = [q[0] for q in queries]
    vecs = {}
    for phase in PhaseConfig:
        lengths = list(total_lengths)
        if BASELINE_TOTAL_LENGTH not in lengths:
            lengths.append(BASELINE_TOTAL_LENGTH)
        for length in lengths:
            run = run_pipeline(
                queries,
                corpus,
                index,
                modified_policy=PadToTotalLength(length),
                phase=phase,
                k_per_token=k_per_token,
                rerank_cutoff=rerank_cutoff,
                encoder_cfg=encoder_cfg,
                specials=specials,
                workers=workers,
            )
            vecs[(phase, length)] = _metric_vectors(run, judgments, metrics, qids)

    tests = []
    for phase in PhaseConfig:
        for length in total_lengths:
            if length == BASELINE_TOTAL_LENGTH:
                continue
            for name in metrics:
                sig = paired_t_test(
                    vecs[(phase, length)][name],
                    vecs[(phase, BASELINE_TOTAL_LENGTH)][name],
                    alpha,
                )
                tests.append((phase, length, name, sig))
    family = bonferroni([s.p_value for *_, s in tests], alpha) if tests else []
    flags = {
        (phase, length, name): result.significant
        for (phase, length, name, _), result in zip(tests, family)
    }
    p_values = {(phase, length, name): sig.p_value for phase, length, name, sig in tests}

    rows = []
    for phase in PhaseConfig:
        for length in total_lengths:
            row = {"phase": phase.value, "total_length": length}
            for name in metrics:
                row[name] = _mean(vecs[(phase, length)][name])
                key = (phase, length, name)
                row[f"p_{name}"] = p_values.get(key, 1.0)
                row[f"sig_{name}"] = flags.get(key, False)
            row["bonferroni_m"] = len(tests)
            row["adjusted_alpha"] = family[0].adjusted_alpha if family else alpha
            rows.append(row)
    return rows


def swap_experiment(
    queries: Sequence[Query],
    vocab: Vocabulary,
    *,
    require_what_is: bool,
    encoder_cfg: EncoderConfig = EncoderConfig(),
    specials: SpecialTokens = SpecialTokens(),
) -> list[dict]:
    """Per-query slot shift distances for the token-reorder probe.

    With ``require_what_is`` only queries starting with "what is" (by surface
    string) participate; otherwise every 3-8 token query is reordered. Mean
    and median rows per slot are appended after the per-query rows.
    """
    policy = PadToTotalLength(BASELINE_TOTAL_LENGTH)
    rows = []
    per_slot: dict[str, list[float]] = {}
    for qid, ids in queries:
        if require_what_is and swap_what_is(vocab.surfaces(ids)) is None:
            continue
        new_ids = swap_first_two_to_end(ids)
        if new_ids is None:
            continue
        seq, original = encode_query(ids, policy, encoder_cfg, specials)
        pert_seq, perturbed = encode_query(new_ids, policy, encoder_cfg, specials)
        report = shift_report(original, perturbed, seq, pert_seq)
        for slot, dist in report.distances.items():
            rows.append({"query_id": qid, "slot": slot, "distance": dist})
            per_slot.setdefault(slot, []).append(dist)
    for label, agg in (("mean", _mean), ("median", statistics.median)):
        for slot, values in per_slot.items():
            rows.append({"query_id": label, "slot": slot, "distance": agg(values)})
    return rows


def heatmap_matrix(
    token_ids: Sequence[int],
    positions: int,
    *,
    encoder_cfg: EncoderConfig = EncoderConfig(),
    specials: SpecialTokens = SpecialTokens(),
):
    """Encode a query padded out to ``positions`` and return (matrix, seq)."""
    seq, emb = encode_query(token_ids, PadToTotalLength(positions), encoder_cfg, specials)
    return similarity_heatmap(emb, seq, positions), seq


def write_heatmap_csv(matrix, seq: TokenSeq, vocab: Vocabulary, path) -> None:
    nonmask_ids = [seq.token_ids[i] for i, k in enumerate(seq.kinds) if k.name != "MASK"]
    header = ["position"] + vocab.surfaces(nonmask_ids)
    rows = [[p] + [f"{v:.6f}" for v in matrix[p]] for p in range(matrix.shape[0])]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.6g}"
    return str(value)


def write_report_csv(path, rows: Sequence[dict], fieldnames: Optional[Sequence[str]] = None) -> None:
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([format_cell(row.get(f, "")) for f in fieldnames])


def metric_report(
    run: RunList,
    judgments: Judgments,
    *,
    condition: str = "run",
    baseline_run: Optional[RunList] = None,
    baseline_condition: str = "baseline",
    metrics: Sequence[str] = EVAL_METRICS,
    alpha: float = 0.05,
) -> list[dict]:
    """Mean metrics for a run, with paired significance when a baseline is given."""
    qids = run.queries()
    vecs = _metric_vectors(run, judgments, metrics, qids)
    rows = []
    if baseline_run is None:
        for name in metrics:
            rows.append(
                {"metric": name, "condition": condition, "mean": _mean(vecs[name])}
            )
        return rows
    if sorted(baseline_run.queries()) != sorted(qids):
        raise ValueError("baseline run covers different queries")
    base_vecs = _metric_vectors(baseline_run, judgments, metrics, qids)
    tests = [paired_t_test(vecs[name], base_vecs[name], alpha) for name in metrics]
    family = bonferroni([t.p_value for t in tests], alpha)
    for name, sig, adj in zip(metrics, tests, family):
        rows.append(
            {
                "metric": name,
                "condition": condition,
                "mean": _mean(vecs[name]),
                "baseline_mean": _mean(base_vecs[name]),
                "t": sig.t_statistic,
                "p": sig.p_value,
                "significant": adj.significant,
                "bonferroni_m": len(metrics),
                "adjusted_alpha": adj.adjusted_alpha,
            }
        )
    return rows
