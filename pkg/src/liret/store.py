"""Flat binary persistence for per-token embedding collections.

Layout, little endian throughout: magic ``LIV1``, u32 dim, u64 passage
count, then per passage a u32 doc id, a u32 row count, and row-count
records of (u8 kind code, u32 token id, dim x f32). Files round-trip
bit-exactly; rows are never renormalized on load.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .encoder import EmbeddingMatrix

MAGIC = b"LIV1"
_HEADER = struct.Struct("<IQ")
_PASSAGE_HEADER = struct.Struct("<II")
_MAX_KIND_CODE = 5


class StoreFormatError(ValueError):
    """The bytes on disk are not a valid store file."""


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("kind", "u1"), ("token_id", "<u4"), ("vec", "<f4", (dim,))])


@dataclass
class StoredPassage:
    doc_id: int
    token_ids: np.ndarray  # (n,) uint32
    rows: EmbeddingMatrix

    def __post_init__(self) -> None:
        self.token_ids = np.ascontiguousarray(self.token_ids, dtype=np.uint32)
        if not 0 <= self.doc_id < 2**32:
            raise ValueError("doc_id must fit in an unsigned 32-bit integer")
        if len(self.rows) == 0:
            raise ValueError("passage must have at least one row")
        if self.token_ids.shape[0] != len(self.rows):
            raise ValueError("token_ids length does not match row count")


@dataclass
class CorpusStore:
    dim: int
    passages: list[StoredPassage]
    _by_id: Optional[dict[int, StoredPassage]] = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        seen = set()
        for p in self.passages:
            if p.rows.dim != self.dim:
                raise ValueError(
                    f"passage {p.doc_id} has dim {p.rows.dim}, store dim is {self.dim}"
                )
            if p.doc_id in seen:
                raise ValueError(f"duplicate doc_id {p.doc_id}")
            seen.add(p.doc_id)

    @property
    def total_tokens(self) -> int:
        return sum(len(p.rows) for p in self.passages)

    def doc_ids(self) -> list[int]:
        return [p.doc_id for p in self.passages]

    def passage(self, doc_id: int) -> StoredPassage:
        if self._by_id is None:
            self._by_id = {p.doc_id: p for p in self.passages}
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise ValueError(f"doc_id {doc_id} not in store") from None


def write_store(store: CorpusStore, path) -> None:
    rec = _record_dtype(store.dim)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(store.dim, len(store.passages)))
        for p in store.passages:
            fh.write(_PASSAGE_HEADER.pack(p.doc_id, len(p.rows)))
            arr = np.empty(len(p.rows), dtype=rec)
            arr["kind"] = p.rows.kinds
            arr["token_id"] = p.token_ids
            arr["vec"] = p.rows.rows
            fh.write(arr.tobytes())


def read_store(path) -> CorpusStore:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise StoreFormatError("bad magic")
    if len(data) < 4 + _HEADER.size:
        raise StoreFormatError("truncated header")
    dim, count = _HEADER.unpack_from(data, 4)
    if dim == 0:
        raise StoreFormatError("dim is zero")
    rec = _record_dtype(dim)
    offset = 4 + _HEADER.size
    passages = []
    for _ in range(count):
        if offset + _PASSAGE_HEADER.size > len(data):
            raise StoreFormatError("truncated passage header")
        doc_id, n_rows = _PASSAGE_HEADER.unpack_from(data, offset)
        offset += _PASSAGE_HEADER.size
        if n_rows == 0:
            raise StoreFormatError(f"passage {doc_id} has zero rows")
        nbytes = n_rows * rec.itemsize
        if offset + nbytes > len(data):
            raise StoreFormatError(f"truncated rows for passage {doc_id}")
        arr = np.frombuffer(data, dtype=rec, count=n_rows, offset=offset)
        offset += nbytes
        kinds = arr["kind"]
        if kinds.max(initial=0) > _MAX_KIND_CODE:
            raise StoreFormatError(f"unknown kind code in passage {doc_id}")
        rows = EmbeddingMatrix(
            arr["vec"],
            kinds,
            np.arange(n_rows, dtype=np.int32),
        )
        passages.append(StoredPassage(doc_id, arr["token_id"], rows))
    if offset != len(data):
        raise StoreFormatError("trailing bytes after last passage")
    return CorpusStore(dim, passages)
