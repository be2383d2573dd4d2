"""Embedding-shift measurement for reordered queries, and similarity heatmaps.

The shift report tracks seven slots of a 32-token padded query: the three
structural tokens, the first and third text token (followed by identity
across the reorder, since their positions move), and the masks at the 13th
and 32nd token, which the 3-8 text-token eligibility rule guarantees.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .encoder import EmbeddingMatrix
from .tokens import TokenKind, TokenSeq

TRACKED_SLOTS = ("Cls", "Q", "Sep", "Text#1", "Text#3", "Mask@13", "Mask@32")

# 1-indexed token positions of the tracked masks, per the slot labels.
_MASK_SLOT_POSITIONS = {"Mask@13": 12, "Mask@32": 31}


@dataclass(frozen=True)
class ShiftReport:
    """Cosine distance per tracked slot, each in [0, 2]."""

    distances: dict[str, float]


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def _check_eligible(seq: TokenSeq) -> int:
    m = len(seq.text_positions)
    kinds = seq.kinds
    eligible = (
        3 <= m <= 8
        and len(seq) >= 32
        and kinds[0] is TokenKind.CLS
        and kinds[1] is TokenKind.Q
        and kinds[12] is TokenKind.MASK
        and kinds[31] is TokenKind.MASK
    )
    if not eligible:
        raise ValueError(
            "query not eligible: need 3-8 text tokens padded to 32 so the "
            "13th and 32nd tokens are masks"
        )
    return m


def _track_text(seq: TokenSeq, perturbed_seq: TokenSeq) -> dict[int, int]:
    """Map original text index -> perturbed text index by token identity.

    Repeated tokens pair up by occurrence order, which keeps the mapping a
    bijection for any reordering of the same token multiset.
    """
    orig_ids = [seq.token_ids[p] for p in seq.text_positions]
    pert_ids = [perturbed_seq.token_ids[p] for p in perturbed_seq.text_positions]
    if sorted(orig_ids) != sorted(pert_ids):
        raise ValueError("perturbed query must contain the same text tokens")
    occurrences: dict[int, list[int]] = {}
    for j, t in enumerate(pert_ids):
        occurrences.setdefault(t, []).append(j)
    seen: dict[int, int] = {}
    mapping = {}
    for i, t in enumerate(orig_ids):
        r = seen.get(t, 0)
        seen[t] = r + 1
        mapping[i] = occurrences[t][r]
    return mapping


def shift_report(
    original: EmbeddingMatrix,
    perturbed: EmbeddingMatrix,
    seq: TokenSeq,
    perturbed_seq: Optional[TokenSeq] = None,
) -> ShiftReport:
    """Per-slot cosine distances between the original and reordered encodings.

    ``seq`` is the original query; ``perturbed_seq`` (defaulting to ``seq``
    when the perturbation leaves positions alone) tells the report where each
    text token landed, since Text#1 and Text#3 follow the token, not the
    position.
    """
    if perturbed_seq is None:
        perturbed_seq = seq
    n = len(seq)
    if not (len(original) == len(perturbed) == len(perturbed_seq) == n):
        raise ValueError("matrices must match the sequence length")
    m = _check_eligible(seq)
    _check_eligible(perturbed_seq)
    text_map = _track_text(seq, perturbed_seq)
    sep = 2 + m
    slot_rows = {
        "Cls": (0, 0),
        "Q": (1, 1),
        "Sep": (sep, sep),
        "Text#1": (2, 2 + text_map[0]),
        "Text#3": (4, 2 + text_map[2]),
        "Mask@13": (12, 12),
        "Mask@32": (31, 31),
    }
    distances = {}
    for slot in TRACKED_SLOTS:
        a, b = slot_rows[slot]
        d = 1.0 - _cosine(original.rows[a], perturbed.rows[b])
        distances[slot] = min(max(d, 0.0), 2.0)
    return ShiftReport(distances)


def similarity_heatmap(
    query_emb: EmbeddingMatrix, seq: TokenSeq, max_positions: int
) -> np.ndarray:
    """Cosine of every row at positions [0, max_positions) to each non-mask row."""
    if len(seq) != len(query_emb):
        raise ValueError("sequence and matrix lengths differ")
    if max_positions < 1:
        raise ValueError("max_positions must be >= 1")
    if max_positions > len(query_emb):
        raise ValueError(
            f"max_positions {max_positions} exceeds sequence length {len(query_emb)}"
        )
    nonmask = query_emb.nonmask_rows()
    rows = query_emb.rows.astype(np.float64)
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows[:max_positions] @ rows[nonmask].T


def cyclic_correlations(heatmap: np.ndarray, period: int = 32) -> np.ndarray:
    """Pearson correlation of each row past ``period`` with its counterpart
    one period earlier. Rows with zero variance correlate as 0."""
    n = heatmap.shape[0]
    if n <= period:
        raise ValueError("heatmap has no rows past the period")
    out = []
    for p in range(period, min(n, 2 * period)):
        a = heatmap[p]
        b = heatmap[p - period]
        sa, sb = a.std(), b.std()
        if sa == 0.0 or sb == 0.0:
            out.append(0.0)
            continue
        out.append(float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb)))
    return np.asarray(out)
