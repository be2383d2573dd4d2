"""Query token sequence construction, attention masking, and reorder probes.

Queries are assembled as ``[CLS] [Q] <text> [SEP]`` followed by a
policy-controlled run of ``[MASK]`` padding tokens. Mask positions are
blocked as attention targets for every other position, which is what makes
mask rows independent of each other downstream.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, TypeVar, Union

import numpy as np

QUERY_LENGTH_CAP = 512

T = TypeVar("T")


class TokenKind(enum.IntEnum):
    """Per-token role label. Values double as the on-disk kind codes."""

    CLS = 0
    Q = 1
    SEP = 2
    TEXT = 3
    MASK = 4
    DOC_TEXT = 5


#: Kinds that are not query text and not padding masks.
STRUCTURAL_KINDS = (TokenKind.CLS, TokenKind.Q, TokenKind.SEP)


@dataclass(frozen=True)
class SpecialTokens:
    """Vocabulary ids of the structural tokens (BERT-style defaults)."""

    cls_id: int = 101
    q_id: int = 1
    sep_id: int = 102
    mask_id: int = 103


@dataclass(frozen=True)
class PadToTotalLength:
    """Append masks until the sequence reaches ``total_length``.

    Never truncates: if the structural+text prefix is already at or past the
    target, no masks are appended.
    """

    total_length: int

    def __post_init__(self) -> None:
        if self.total_length < 0:
            raise ValueError("total_length must be >= 0")

    def mask_count(self, base_length: int) -> int:
        return max(0, self.total_length - base_length)


@dataclass(frozen=True)
class FixedMaskCount:
    """Append exactly ``count`` masks regardless of the text length."""

    count: int

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError("count must be >= 0")

    def mask_count(self, base_length: int) -> int:
        return self.count


MaskPolicy = Union[PadToTotalLength, FixedMaskCount]


class OversizeQueryError(ValueError):
    """Structural plus text tokens exceed the hard length cap."""


@dataclass(frozen=True)
class TokenSeq:
    """An ordered token sequence with one role label per token."""

    token_ids: tuple[int, ...]
    kinds: tuple[TokenKind, ...]
    source_text: Optional[str] = None

    def __post_init__(self) -> None:
        if len(self.token_ids) != len(self.kinds):
            raise ValueError("token_ids and kinds must have equal length")

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def mask_positions(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is TokenKind.MASK)

    @property
    def text_positions(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is TokenKind.TEXT)

    def kinds_array(self) -> np.ndarray:
        return np.fromiter((int(k) for k in self.kinds), dtype=np.uint8, count=len(self.kinds))

    def ids_array(self) -> np.ndarray:
        return np.asarray(self.token_ids, dtype=np.uint32)


@dataclass(frozen=True)
class AttentionMask:
    """``allowed[i][j]`` is True iff position ``i`` may attend to position ``j``."""

    allowed: np.ndarray

    def __post_init__(self) -> None:
        a = self.allowed
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.dtype != np.bool_:
            raise ValueError("allowed must be a square boolean matrix")

    def __len__(self) -> int:
        return self.allowed.shape[0]


def build_query_input(
    text_token_ids: Sequence[int],
    policy: MaskPolicy,
    specials: SpecialTokens = SpecialTokens(),
    length_cap: int = QUERY_LENGTH_CAP,
) -> TokenSeq:
    """Assemble the augmented query sequence ``[CLS][Q] text [SEP] [MASK]*``.

    Args:
        text_token_ids: pre-tokenized query text ids, non-empty.
        policy: how many masks to append.
        specials: vocabulary ids for the structural tokens.
        length_cap: hard cap on structural+text length (masks excluded).

    Raises:
        OversizeQueryError: structural+text length exceeds ``length_cap``.
    """
    if len(text_token_ids) == 0:
        raise ValueError("query must contain at least one text token")
    base_length = len(text_token_ids) + 3
    if base_length > length_cap:
        raise OversizeQueryError(
            f"query needs {base_length} non-mask tokens, cap is {length_cap}"
        )
    n_masks = policy.mask_count(base_length)
    ids = [specials.cls_id, specials.q_id, *text_token_ids, specials.sep_id]
    ids.extend([specials.mask_id] * n_masks)
    kinds = [TokenKind.CLS, TokenKind.Q]
    kinds.extend([TokenKind.TEXT] * len(text_token_ids))
    kinds.append(TokenKind.SEP)
    kinds.extend([TokenKind.MASK] * n_masks)
    return TokenSeq(tuple(int(i) for i in ids), tuple(kinds))


def build_attention_mask(seq: TokenSeq) -> AttentionMask:
    """Allow everything except attending to a mask position other than oneself."""
    kinds = seq.kinds_array()
    n = len(kinds)
    allowed = np.broadcast_to(kinds != int(TokenKind.MASK), (n, n)).copy()
    np.fill_diagonal(allowed, True)
    return AttentionMask(allowed)


def swap_first_two_to_end(query_text_tokens: Sequence[T]) -> Optional[list[T]]:
    """Move the first two tokens to the end, swapped; None unless length is 3-8."""
    if not 3 <= len(query_text_tokens) <= 8:
        return None
    first, second, *rest = query_text_tokens
    return [*rest, second, first]


def swap_what_is(query_text_tokens: Sequence[str]) -> Optional[list[str]]:
    """Reorder queries that start with "what is"; None if ineligible.

    The check is case-insensitive on surface strings; the reorder is the same
    move-and-swap applied by :func:`swap_first_two_to_end`.
    """
    if len(query_text_tokens) >= 2:
        first = str(query_text_tokens[0]).lower()
        second = str(query_text_tokens[1]).lower()
        if first == "what" and second == "is":
            return swap_first_two_to_end(query_text_tokens)
    return None


class Vocabulary:
    """Token id <-> surface string table.

    The side-file format is one token per line; the id of a token is its
    0-based line number.
    """

    def __init__(self, tokens: Sequence[str]):
        self._tokens = [str(t) for t in tokens]
        self._ids: dict[str, int] = {}
        for i, tok in enumerate(self._tokens):
            self._ids.setdefault(tok, i)

    def __len__(self) -> int:
        return len(self._tokens)

    def surface(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._tokens):
            raise ValueError(f"unknown token id {token_id}")
        return self._tokens[token_id]

    def surfaces(self, token_ids: Sequence[int]) -> list[str]:
        return [self.surface(i) for i in token_ids]

    def id_of(self, surface: str) -> int:
        try:
            return self._ids[surface]
        except KeyError:
            raise ValueError(f"token {surface!r} not in vocabulary") from None

    def special_tokens(self) -> SpecialTokens:
        """Locate the structural token ids by their conventional surfaces.

        ``[Q]`` falls back to ``[unused0]``, the slot BERT-style checkpoints
        repurpose for the query marker.
        """
        try:
            q_id = self._ids["[Q]"] if "[Q]" in self._ids else self._ids["[unused0]"]
            return SpecialTokens(
                cls_id=self._ids["[CLS]"],
                q_id=q_id,
                sep_id=self._ids["[SEP]"],
                mask_id=self._ids["[MASK]"],
            )
        except KeyError as exc:
            raise ValueError(f"vocabulary lacks structural token {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self._tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls(Path(path).read_text(encoding="utf-8").splitlines())
