"""Deterministic hash-based token encoder honoring the attention mask.

Stands in for a trained contextualizer: every token gets a pseudo-random
unit base vector keyed by (seed, token id) plus a weighted positional
component, then one uniform-weight aggregation pass over the positions its
attention row allows. All arithmetic is float32 and reproducible
bit-for-bit, so the mask-independence guarantees can be asserted exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tokens import AttentionMask, TokenKind, TokenSeq, build_attention_mask

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_MULT1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_MULT2 = np.uint64(0x94D049BB133111EB)
_U64 = 0xFFFFFFFFFFFFFFFF

# Separate key domains so token-id streams never collide with position streams.
_TOKEN_DOMAIN = np.uint64(1)
_POSITION_DOMAIN = np.uint64(2)


def _mix(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer over uint64 scalars or arrays."""
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _MIX_MULT1
        x = (x ^ (x >> np.uint64(27))) * _MIX_MULT2
        return x ^ (x >> np.uint64(31))


def _stream_keys(seed: int, domain: np.uint64, values: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        k = _mix(np.uint64(seed & _U64) + _GOLDEN * domain)
        return _mix(k ^ values.astype(np.uint64))


def _noise(keys: np.ndarray, dim: int) -> np.ndarray:
    """Counter-based values in [-1, 1), one row of ``dim`` per key."""
    with np.errstate(over="ignore"):
        counters = _GOLDEN * np.arange(1, dim + 1, dtype=np.uint64)
        h = _mix(keys[:, None] + counters[None, :])
    vals = (h >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return (vals * 2.0 - 1.0).astype(np.float32)


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 16
    seed: int = 42
    position_weight: float = 0.25

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not math.isfinite(self.position_weight):
            raise ValueError("position_weight must be finite")


@dataclass
class EmbeddingMatrix:
    """Per-token embedding rows with aligned kind labels and positions."""

    rows: np.ndarray  # (n, dim) float32
    kinds: np.ndarray  # (n,) uint8 TokenKind codes
    positions: np.ndarray  # (n,) int32

    def __post_init__(self) -> None:
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        self.kinds = np.ascontiguousarray(self.kinds, dtype=np.uint8)
        self.positions = np.ascontiguousarray(self.positions, dtype=np.int32)
        if self.rows.ndim != 2:
            raise ValueError("rows must be a 2-d array")
        if not (self.kinds.shape[0] == self.positions.shape[0] == self.rows.shape[0]):
            raise ValueError("row, kind, and position counts differ")

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def mask_rows(self) -> np.ndarray:
        return np.flatnonzero(self.kinds == int(TokenKind.MASK))

    def nonmask_rows(self) -> np.ndarray:
        return np.flatnonzero(self.kinds != int(TokenKind.MASK))


def _base_matrix(token_ids: np.ndarray, positions: np.ndarray, cfg: EncoderConfig) -> np.ndarray:
    tok_keys = _stream_keys(cfg.seed, _TOKEN_DOMAIN, np.asarray(token_ids))
    pos_keys = _stream_keys(cfg.seed, _POSITION_DOMAIN, np.asarray(positions))
    v = _noise(tok_keys, cfg.dim) + np.float32(cfg.position_weight) * _noise(pos_keys, cfg.dim)
    norms = np.sqrt((v * v).sum(axis=1))
    return v / norms[:, None]


def base_vector(token_id: int, position: int, cfg: EncoderConfig = EncoderConfig()) -> np.ndarray:
    """Unit base vector for one (token id, position) pair; bit-stable."""
    return _base_matrix(np.asarray([token_id]), np.asarray([position]), cfg)[0]


def contextualize(
    seq: TokenSeq,
    mask: AttentionMask,
    cfg: EncoderConfig = EncoderConfig(),
) -> EmbeddingMatrix:
    """Encode a sequence into unit-norm rows under the attention mask.

    Row i is ``normalize(base_i + mean over allowed j of base_j)``. Because
    mask columns are blocked for everyone else, non-mask rows come out
    bit-identical whatever the mask count, and each mask row depends only on
    the non-mask prefix plus its own id and position.
    """
    n = len(seq)
    if mask.allowed.shape != (n, n):
        raise ValueError(
            f"attention mask shape {mask.allowed.shape} does not match sequence length {n}"
        )
    if not np.array_equal(mask.allowed, build_attention_mask(seq).allowed):
        raise ValueError("attention mask inconsistent with sequence kinds")

    kinds = seq.kinds_array()
    positions = np.arange(n, dtype=np.int64)
    base = _base_matrix(seq.ids_array(), positions, cfg)

    nonmask = np.flatnonzero(kinds != int(TokenKind.MASK))
    masked = np.flatnonzero(kinds == int(TokenKind.MASK))
    out = np.empty_like(base)
    if nonmask.size:
        shared = base[nonmask].sum(axis=0, dtype=np.float32)
        out[nonmask] = base[nonmask] + np.float32(1.0 / nonmask.size) * shared
        if masked.size:
            agg = shared[None, :] + base[masked]
            out[masked] = base[masked] + np.float32(1.0 / (nonmask.size + 1)) * agg
    else:
        # Degenerate all-mask sequence: each row attends to itself only.
        out[masked] = base[masked] + base[masked]

    norms = np.sqrt((out * out).sum(axis=1))
    out /= norms[:, None]
    return EmbeddingMatrix(out, kinds, positions.astype(np.int32))
