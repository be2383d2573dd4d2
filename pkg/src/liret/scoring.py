"""Late-interaction scoring: sum over query rows of the best document row.

Inner products are float32 like the stored vectors; per-document sums
accumulate in float64 so long padded queries stay stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EmbeddingMatrix
from .index import CandidateSet
from .store import CorpusStore


@dataclass
class ScoredDoc:
    doc_id: int
    score: float
    #: (query row, best doc row, contribution) per query row; ties take the lowest doc row.
    per_token_contrib: list[tuple[int, int, float]]


def maxsim(query_emb: EmbeddingMatrix, doc_emb: EmbeddingMatrix, doc_id: int = -1) -> ScoredDoc:
    """Score one document: sum over query rows of the max inner product."""
    if len(doc_emb) == 0:
        raise ValueError("document has no rows")
    if query_emb.dim != doc_emb.dim:
        raise ValueError("query/document dimension mismatch")
    if len(query_emb) == 0:
        return ScoredDoc(doc_id, 0.0, [])
    sims = query_emb.rows @ doc_emb.rows.T
    best = sims.argmax(axis=1)
    vals = sims[np.arange(len(query_emb)), best]
    contribs = [(i, int(best[i]), float(vals[i])) for i in range(len(query_emb))]
    return ScoredDoc(doc_id, float(vals.sum(dtype=np.float64)), contribs)


def row_max_similarities(query_emb: EmbeddingMatrix, doc_emb: EmbeddingMatrix) -> np.ndarray:
    """Per-query-row best inner product against the document, as float64."""
    if len(doc_emb) == 0:
        raise ValueError("document has no rows")
    if len(query_emb) == 0:
        return np.empty(0, dtype=np.float64)
    sims = query_emb.rows @ doc_emb.rows.T
    return sims.max(axis=1).astype(np.float64)


def rerank(
    query_emb: EmbeddingMatrix,
    candidates: CandidateSet,
    corpus: CorpusStore,
    cutoff: int,
) -> list[tuple[int, float]]:
    """Order candidates by score descending (ties to lower doc id), truncated.

    All candidate rows are scored through one blocked matrix product with a
    segmented max, which matches per-document :func:`maxsim` scoring.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    ids = list(candidates.doc_ids)
    if cutoff == 0 or not ids:
        return []
    blocks = [corpus.passage(d).rows.rows for d in ids]
    if query_emb.dim != corpus.dim:
        raise ValueError("query/corpus dimension mismatch")
    lengths = np.asarray([b.shape[0] for b in blocks])
    if len(query_emb) == 0:
        scores = np.zeros(len(ids), dtype=np.float64)
    else:
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        sims = query_emb.rows @ np.concatenate(blocks).T
        maxes = np.maximum.reduceat(sims, starts, axis=1)
        scores = maxes.sum(axis=0, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    return [(ids[i], float(scores[i])) for i in order[:cutoff]]


def weight_histogram(query_emb: EmbeddingMatrix) -> dict[int, int]:
    """Integer weight per non-mask row in a remapped query.

    Every mask row must be an exact copy of some non-mask row (what the
    remapper produces); its weight goes to the lowest-index match. Weights
    sum to the total row count.
    """
    nonmask = query_emb.nonmask_rows()
    masked = query_emb.mask_rows()
    weights = {int(t): 1 for t in nonmask}
    if masked.size == 0:
        return weights
    if nonmask.size == 0:
        raise ValueError("mask rows present but no non-mask rows to match")
    eq = (query_emb.rows[masked][:, None, :] == query_emb.rows[nonmask][None, :, :]).all(axis=2)
    matched = eq.any(axis=1)
    if not matched.all():
        bad = int(masked[np.flatnonzero(~matched)[0]])
        raise ValueError(f"mask row {bad} was not remapped onto a non-mask row")
    for t in eq.argmax(axis=1):
        weights[int(nonmask[t])] += 1
    return weights
