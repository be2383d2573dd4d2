"""Seeded synthetic corpus, query, and judgment generation.

Desk-scale stand-in for a real collection: documents are token bags over a
small vocabulary, queries sample tokens from an anchor document (so every
query has at least one highly relevant doc), and relevance grades come from
query/document token overlap, capped at 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig, contextualize
from .evaluation import Judgments
from .store import CorpusStore, StoredPassage
from .tokens import SpecialTokens, TokenKind, TokenSeq, Vocabulary, build_attention_mask

_SPECIAL_SURFACES = ("[CLS]", "[Q]", "[SEP]", "[MASK]")
_FIRST_TEXT_ID = len(_SPECIAL_SURFACES) + 2  # after "what" and "is"


@dataclass(frozen=True)
class SynthSpec:
    n_docs: int = 1000
    doc_len: int = 20
    vocab_size: int = 500
    n_queries: int = 32
    seed: int = 7

    def __post_init__(self) -> None:
        if self.n_docs < 1 or self.doc_len < 1 or self.n_queries < 1:
            raise ValueError("corpus dimensions must be positive")
        if self.vocab_size < _FIRST_TEXT_ID + 8:
            raise ValueError("vocabulary too small")


def synthetic_vocabulary(vocab_size: int) -> Vocabulary:
    """Structural tokens at ids 0-3, then "what", "is", then filler words."""
    tokens = list(_SPECIAL_SURFACES) + ["what", "is"]
    tokens += [f"w{i:04d}" for i in range(len(tokens), vocab_size)]
    return Vocabulary(tokens)


def generate_dataset(
    spec: SynthSpec, encoder_cfg: EncoderConfig
) -> tuple[CorpusStore, list[tuple[str, tuple[int, ...]]], Judgments, Vocabulary]:
    """Build (corpus store, queries, judgments, vocabulary) deterministically."""
    rng = np.random.default_rng(spec.seed)
    vocab = synthetic_vocabulary(spec.vocab_size)
    what_id = vocab.id_of("what")
    is_id = vocab.id_of("is")

    # Zipf-like token popularity so overlaps (and grades 2-3) actually occur.
    text_ids = np.arange(4, spec.vocab_size)
    weights = 1.0 / np.arange(1, text_ids.size + 1)
    weights /= weights.sum()

    doc_tokens = [
        rng.choice(text_ids, size=spec.doc_len, replace=True, p=weights)
        for _ in range(spec.n_docs)
    ]

    passages = []
    for doc_id, ids in enumerate(doc_tokens):
        seq = TokenSeq(
            tuple(int(t) for t in ids),
            tuple([TokenKind.DOC_TEXT] * len(ids)),
        )
        emb = contextualize(seq, build_attention_mask(seq), encoder_cfg)
        passages.append(StoredPassage(doc_id, seq.ids_array(), emb))
    corpus = CorpusStore(encoder_cfg.dim, passages)

    queries: list[tuple[str, tuple[int, ...]]] = []
    for qnum in range(1, spec.n_queries + 1):
        anchor = doc_tokens[int(rng.integers(spec.n_docs))]
        with_prefix = rng.random() < 0.25
        max_from_doc = 6 if with_prefix else 8
        take = int(rng.integers(3 if not with_prefix else 1, max_from_doc + 1))
        picked = rng.choice(anchor, size=take, replace=False)
        ids = ([what_id, is_id] if with_prefix else []) + [int(t) for t in picked]
        queries.append((str(qnum), tuple(ids)))

    doc_sets = [set(int(t) for t in ids) for ids in doc_tokens]
    judgments = Judgments()
    for qid, ids in queries:
        q_set = set(ids)
        for doc_id, d_set in enumerate(doc_sets):
            overlap = len(q_set & d_set)
            if overlap:
                judgments.add(qid, str(doc_id), min(3, overlap))
    return corpus, queries, judgments, vocab


def special_tokens(vocab: Vocabulary) -> SpecialTokens:
    return vocab.special_tokens()


def write_queries_tsv(queries, path) -> None:
    """One query per line: ``qid<TAB>space-separated token ids``."""
    lines = [f"{qid}\t{' '.join(str(t) for t in ids)}" for qid, ids in queries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_queries_tsv(path) -> list[tuple[str, tuple[int, ...]]]:
    queries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            qid, ids_field = line.split("\t")
            ids = tuple(int(t) for t in ids_field.split())
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected 'qid<TAB>id id id ...'") from None
        queries.append((qid, ids))
    return queries
