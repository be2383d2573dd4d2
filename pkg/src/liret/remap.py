"""Replace structural or mask query rows by their nearest text-row vector.

Replacement is an exact copy of the winning target row (never an average),
so a remapped query decomposes into integer term weights downstream.
"""

from __future__ import annotations

import enum

import numpy as np

from .encoder import EmbeddingMatrix
from .tokens import TokenKind


class RemapCondition(enum.Enum):
    NONE = "none"
    ALL_STRUCTURAL_TO_TEXT = "all-to-text"
    MASK_TO_TEXT = "mask-to-text"
    MASK_TO_STRUCTURAL_AND_TEXT = "mask-to-all"


_SOURCES = {
    RemapCondition.ALL_STRUCTURAL_TO_TEXT: (
        TokenKind.CLS,
        TokenKind.Q,
        TokenKind.SEP,
        TokenKind.MASK,
    ),
    RemapCondition.MASK_TO_TEXT: (TokenKind.MASK,),
    RemapCondition.MASK_TO_STRUCTURAL_AND_TEXT: (TokenKind.MASK,),
}

_TARGETS = {
    RemapCondition.ALL_STRUCTURAL_TO_TEXT: (TokenKind.TEXT,),
    RemapCondition.MASK_TO_TEXT: (TokenKind.TEXT,),
    RemapCondition.MASK_TO_STRUCTURAL_AND_TEXT: (
        TokenKind.CLS,
        TokenKind.Q,
        TokenKind.SEP,
        TokenKind.TEXT,
    ),
}


def remap(query_emb: EmbeddingMatrix, cond: RemapCondition) -> EmbeddingMatrix:
    """Copy each source row's nearest (cosine) target row over it.

    Stored rows are unit norm, so cosine is the plain inner product and the
    vectors are compared as stored. Nearest ties go to the lowest target row
    index; rows outside the source set are left bit-identical.
    """
    if cond is RemapCondition.NONE:
        return query_emb
    kinds = query_emb.kinds
    if not (kinds == int(TokenKind.TEXT)).any():
        raise ValueError("no text rows available as remap targets")
    sources = np.flatnonzero(np.isin(kinds, [int(k) for k in _SOURCES[cond]]))
    targets = np.flatnonzero(np.isin(kinds, [int(k) for k in _TARGETS[cond]]))
    rows = query_emb.rows.copy()
    if sources.size:
        sims = query_emb.rows[sources] @ query_emb.rows[targets].T
        pick = sims.argmax(axis=1)
        rows[sources] = query_emb.rows[targets[pick]]
    return EmbeddingMatrix(rows, kinds.copy(), query_emb.positions.copy())
