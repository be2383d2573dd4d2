"""Exact-scan first-phase retrieval over all corpus token vectors.

The index is a flat float32 matrix of every token embedding in the corpus
with parallel (doc id, row index) arrays. Top-k is a full scan: a blocked
BLAS inner product followed by a partition, with ties broken by lower doc
id then lower row index so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EmbeddingMatrix
from .store import CorpusStore


@dataclass
class TokenIndex:
    vectors: np.ndarray  # (total_tokens, dim) float32
    doc_ids: np.ndarray  # (total_tokens,) uint32
    row_indices: np.ndarray  # (total_tokens,) uint32

    def __post_init__(self) -> None:
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self.doc_ids = np.ascontiguousarray(self.doc_ids, dtype=np.uint32)
        self.row_indices = np.ascontiguousarray(self.row_indices, dtype=np.uint32)
        if not (self.vectors.shape[0] == self.doc_ids.shape[0] == self.row_indices.shape[0]):
            raise ValueError("vectors, doc_ids, and row_indices must align")

    @property
    def total_tokens(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def from_store(cls, store: CorpusStore) -> "TokenIndex":
        if store.passages:
            vectors = np.concatenate([p.rows.rows for p in store.passages])
            doc_ids = np.concatenate(
                [np.full(len(p.rows), p.doc_id, dtype=np.uint32) for p in store.passages]
            )
            row_indices = np.concatenate(
                [np.arange(len(p.rows), dtype=np.uint32) for p in store.passages]
            )
        else:
            vectors = np.empty((0, store.dim), dtype=np.float32)
            doc_ids = np.empty(0, dtype=np.uint32)
            row_indices = np.empty(0, dtype=np.uint32)
        return cls(vectors, doc_ids, row_indices)


@dataclass(frozen=True)
class CandidateSet:
    doc_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.doc_ids, self.doc_ids[1:])):
            raise ValueError("doc_ids must be strictly increasing")

    def __len__(self) -> int:
        return len(self.doc_ids)


def _topk_membership(scores: np.ndarray, k: int, index: TokenIndex) -> np.ndarray:
    """Unordered entry indices of the k best by (score desc, doc asc, row asc)."""
    n = scores.shape[0]
    if k >= n:
        return np.arange(n)
    kth = np.partition(scores, n - k)[n - k]
    ge = np.flatnonzero(scores >= kth)
    if ge.size == k:
        return ge
    strict = ge[scores[ge] > kth]
    tied = ge[scores[ge] == kth]
    need = k - strict.size
    order = np.lexsort((index.row_indices[tied], index.doc_ids[tied]))
    return np.concatenate([strict, tied[order[:need]]])


def _rank_entries(scores: np.ndarray, chosen: np.ndarray, index: TokenIndex) -> np.ndarray:
    order = np.lexsort(
        (index.row_indices[chosen], index.doc_ids[chosen], -scores[chosen].astype(np.float64))
    )
    return chosen[order]


def token_topk(q: np.ndarray, k: int, index: TokenIndex) -> list[tuple[int, float]]:
    """The k corpus token entries most similar to ``q`` by inner product.

    Exact scan, no approximation. Ties are broken by lower doc id, then
    lower row index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if index.total_tokens == 0:
        raise ValueError("index is empty")
    q = np.asarray(q, dtype=np.float32)
    scores = index.vectors @ q
    chosen = _rank_entries(scores, _topk_membership(scores, k, index), index)
    return [(int(index.doc_ids[i]), float(scores[i])) for i in chosen]


def candidate_set(query_emb: EmbeddingMatrix, k_per_token: int, index: TokenIndex) -> CandidateSet:
    """Union of per-query-row top-k documents."""
    if len(query_emb) == 0:
        raise ValueError("query has no rows")
    if k_per_token < 1:
        raise ValueError("k_per_token must be >= 1")
    if index.total_tokens == 0:
        raise ValueError("index is empty")
    if query_emb.dim != index.dim:
        raise ValueError("query/index dimension mismatch")

    scores = query_emb.rows @ index.vectors.T
    n = index.total_tokens
    k = k_per_token
    if k >= n:
        docs = np.unique(index.doc_ids)
        return CandidateSet(tuple(int(d) for d in docs))

    kth = np.partition(scores, n - k, axis=1)[:, n - k]
    ge = scores >= kth[:, None]
    counts = ge.sum(axis=1)
    clean = counts == k
    col_any = ge[clean].any(axis=0) if clean.any() else np.zeros(n, dtype=bool)
    extra = [
        _topk_membership(scores[r], k, index)
        for r in np.flatnonzero(~clean)
    ]
    selected = np.flatnonzero(col_any)
    if extra:
        selected = np.concatenate([selected, *extra])
    docs = np.unique(index.doc_ids[selected])
    return CandidateSet(tuple(int(d) for d in docs))


def candidate_run_entries(
    query_emb: EmbeddingMatrix, k_per_token: int, index: TokenIndex
) -> list[tuple[int, float]]:
    """Candidate docs with their best single-token score, for debug run files."""
    cands = candidate_set(query_emb, k_per_token, index)
    scores = query_emb.rows @ index.vectors.T
    best_per_entry = scores.max(axis=0)
    out = []
    for d in cands.doc_ids:
        entry_mask = index.doc_ids == d
        out.append((d, float(best_per_entry[entry_mask].max())))
    out.sort(key=lambda pair: (-pair[1], pair[0]))
    return out
