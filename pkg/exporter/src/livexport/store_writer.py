"""Streaming writer for the LIV1 token-embedding store format.

Layout, little endian: magic ``LIV1``, u32 dim, u64 passage count, then per
passage a u32 doc id, u32 row count, and row records of (u8 kind code,
u32 token id, dim x f32). The passage count is patched into the header on
close so passages can stream through without buffering.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"LIV1"
_HEADER = struct.Struct("<IQ")
_PASSAGE_HEADER = struct.Struct("<II")

KIND_CLS = 0
KIND_Q = 1
KIND_SEP = 2
KIND_TEXT = 3
KIND_MASK = 4
KIND_DOC_TEXT = 5


class StoreWriter:
    def __init__(self, path, dim: int):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self._dim = dim
        self._count = 0
        self._seen: set[int] = set()
        self._record = np.dtype([("kind", "u1"), ("token_id", "<u4"), ("vec", "<f4", (dim,))])
        self._fh = open(path, "wb")
        self._fh.write(MAGIC)
        self._fh.write(_HEADER.pack(dim, 0))

    def add(self, doc_id: int, kinds, token_ids, vectors) -> None:
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        kinds = np.ascontiguousarray(kinds, dtype=np.uint8)
        token_ids = np.ascontiguousarray(token_ids, dtype=np.uint32)
        n = vectors.shape[0]
        if n == 0:
            raise ValueError("passage must have at least one row")
        if vectors.shape[1] != self._dim:
            raise ValueError(f"vectors have dim {vectors.shape[1]}, store dim is {self._dim}")
        if kinds.shape[0] != n or token_ids.shape[0] != n:
            raise ValueError("kinds/token_ids must align with vectors")
        if not 0 <= doc_id < 2**32:
            raise ValueError("doc_id must fit in an unsigned 32-bit integer")
        if doc_id in self._seen:
            raise ValueError(f"duplicate doc_id {doc_id}")
        self._seen.add(doc_id)
        self._fh.write(_PASSAGE_HEADER.pack(doc_id, n))
        rows = np.empty(n, dtype=self._record)
        rows["kind"] = kinds
        rows["token_id"] = token_ids
        rows["vec"] = vectors
        self._fh.write(rows.tobytes())
        self._count += 1

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.seek(len(MAGIC))
        self._fh.write(_HEADER.pack(self._dim, self._count))
        self._fh.close()

    def __enter__(self) -> "StoreWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
