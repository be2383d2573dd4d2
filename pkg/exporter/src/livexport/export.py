"""Batch inference over a retrieval checkpoint into LIV1 stores.

Queries are assembled as ``[CLS] [Q] text [SEP]`` plus mask augmentation
rows; the attention matrix handed to the encoder blocks every mask (and
padding) column for all rows except the token's own, so mask rows cannot
influence any other representation. Documents get ``[CLS] [D] text [SEP]``
with plain full attention.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import torch

from .checkpoint import LoadedCheckpoint, load_checkpoint
from .store_writer import (
    KIND_CLS,
    KIND_DOC_TEXT,
    KIND_MASK,
    KIND_Q,
    KIND_SEP,
    KIND_TEXT,
    StoreWriter,
)

_PUNCTUATION = set(string.punctuation)


@dataclass(frozen=True)
class ExportSpec:
    checkpoint: str
    output: Path
    queries: Optional[Path] = None
    collection: Optional[Path] = None
    mask_count: Optional[int] = None
    total_length: Optional[int] = None
    batch_size: int = 32
    doc_maxlen: int = 180
    filter_punctuation: bool = False
    vocab_out: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mask_count is not None and self.total_length is not None:
            raise ValueError("set either mask_count or total_length, not both")
        if self.mask_count is not None and self.mask_count < 0:
            raise ValueError("mask_count must be >= 0")
        if self.total_length is not None and self.total_length < 0:
            raise ValueError("total_length must be >= 0")
        if self.doc_maxlen < 4:
            raise ValueError("doc_maxlen must leave room for the markers")


def read_text_tsv(path) -> list[tuple[int, str]]:
    """``id<TAB>text`` lines with numeric ids."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            ident, text = line.split("\t", 1)
            rows.append((int(ident), text))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected 'id<TAB>text'") from None
    return rows


def write_vocab_file(tokenizer, path) -> None:
    """One surface per line; line number equals the token id."""
    tokens = tokenizer.convert_ids_to_tokens(list(range(len(tokenizer))))
    Path(path).write_text("\n".join(tokens) + "\n", encoding="utf-8")


def _mask_budget(spec: ExportSpec, base_length: int) -> int:
    if spec.mask_count is not None:
        return spec.mask_count
    target = spec.total_length if spec.total_length is not None else 32
    return max(0, target - base_length)


def _encode_batch(
    loaded: LoadedCheckpoint,
    id_lists: Sequence[list[int]],
    augmentation_flags: Sequence[list[bool]],
) -> list[np.ndarray]:
    """Run one padded batch and return per-sequence projected unit rows."""
    batch = len(id_lists)
    max_len = max(len(ids) for ids in id_lists)
    pad_id = loaded.tokenizer.pad_token_id or 0
    input_ids = torch.full((batch, max_len), pad_id, dtype=torch.long)
    allowed = torch.zeros(batch, max_len, max_len, dtype=torch.bool)
    for b, (ids, flags) in enumerate(zip(id_lists, augmentation_flags)):
        n = len(ids)
        input_ids[b, :n] = torch.tensor(ids, dtype=torch.long)
        col_ok = torch.zeros(max_len, dtype=torch.bool)
        col_ok[:n] = ~torch.tensor(flags, dtype=torch.bool)
        allowed[b, :, :] = col_ok
        allowed[b].fill_diagonal_(True)
    with torch.no_grad():
        hidden = loaded.model(
            input_ids=input_ids, attention_mask=allowed.unsqueeze(1)
        ).last_hidden_state.to(torch.float32)
        if loaded.projection is not None:
            hidden = hidden @ loaded.projection.T
        hidden = torch.nn.functional.normalize(hidden, dim=-1)
    return [hidden[b, : len(ids)].numpy() for b, ids in enumerate(id_lists)]


def _batches(items: Sequence, size: int) -> Iterable[Sequence]:
    for start in range(0, len(items), size):
        yield items[start : start + size]


def export_queries(spec: ExportSpec) -> int:
    """Encode each query with mask augmentation and stream it to the store.

    Returns the number of passages written.
    """
    if spec.queries is None:
        raise ValueError("spec.queries is required")
    loaded = load_checkpoint(spec.checkpoint)
    if spec.total_length is not None and spec.total_length > loaded.position_limit:
        raise ValueError(
            f"total_length {spec.total_length} exceeds the encoder position limit "
            f"{loaded.position_limit}"
        )
    tok = loaded.tokenizer
    queries = read_text_tsv(spec.queries)

    prepared = []
    for qid, text in queries:
        text_ids = tok.encode(text, add_special_tokens=False)
        if not text_ids:
            raise ValueError(f"query {qid} tokenized to nothing")
        base = [tok.cls_token_id, loaded.query_marker_id, *text_ids, tok.sep_token_id]
        n_masks = _mask_budget(spec, len(base))
        total = len(base) + n_masks
        if total > loaded.position_limit:
            raise ValueError(
                f"token overflow: query {qid} needs {total} positions, "
                f"limit is {loaded.position_limit}"
            )
        ids = base + [tok.mask_token_id] * n_masks
        kinds = (
            [KIND_CLS, KIND_Q]
            + [KIND_TEXT] * len(text_ids)
            + [KIND_SEP]
            + [KIND_MASK] * n_masks
        )
        flags = [False] * len(base) + [True] * n_masks
        prepared.append((qid, ids, kinds, flags))

    written = 0
    with StoreWriter(spec.output, loaded.dim) as writer:
        for chunk in _batches(prepared, spec.batch_size):
            rows = _encode_batch(loaded, [c[1] for c in chunk], [c[3] for c in chunk])
            for (qid, ids, kinds, _), vectors in zip(chunk, rows):
                writer.add(qid, kinds, ids, vectors)
                written += 1
    if spec.vocab_out is not None:
        write_vocab_file(tok, spec.vocab_out)
    return written


def export_collection(spec: ExportSpec) -> int:
    """Encode documents (no augmentation) and stream them to the store.

    Text beyond ``doc_maxlen`` tokens is truncated, matching the engine
    family's document handling; the optional punctuation filter drops
    single-symbol document rows after encoding.
    """
    if spec.collection is None:
        raise ValueError("spec.collection is required")
    loaded = load_checkpoint(spec.checkpoint)
    doc_maxlen = min(spec.doc_maxlen, loaded.position_limit)
    tok = loaded.tokenizer
    docs = read_text_tsv(spec.collection)

    prepared = []
    for doc_id, text in docs:
        text_ids = tok.encode(text, add_special_tokens=False)[: doc_maxlen - 3]
        if not text_ids:
            raise ValueError(f"document {doc_id} tokenized to nothing")
        ids = [tok.cls_token_id, loaded.doc_marker_id, *text_ids, tok.sep_token_id]
        kinds = [KIND_CLS, KIND_DOC_TEXT] + [KIND_DOC_TEXT] * len(text_ids) + [KIND_SEP]
        prepared.append((doc_id, ids, kinds))

    written = 0
    with StoreWriter(spec.output, loaded.dim) as writer:
        for chunk in _batches(prepared, spec.batch_size):
            id_lists = [c[1] for c in chunk]
            flags = [[False] * len(ids) for ids in id_lists]
            rows = _encode_batch(loaded, id_lists, flags)
            for (doc_id, ids, kinds), vectors in zip(chunk, rows):
                keep = np.ones(len(ids), dtype=bool)
                if spec.filter_punctuation:
                    surfaces = tok.convert_ids_to_tokens(ids)
                    for i, s in enumerate(surfaces):
                        if kinds[i] == KIND_DOC_TEXT and s in _PUNCTUATION:
                            keep[i] = False
                writer.add(
                    doc_id,
                    np.asarray(kinds, dtype=np.uint8)[keep],
                    np.asarray(ids, dtype=np.uint32)[keep],
                    vectors[keep],
                )
                written += 1
    if spec.vocab_out is not None:
        write_vocab_file(tok, spec.vocab_out)
    return written
