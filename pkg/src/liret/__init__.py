"""Late-interaction retrieval engine with mask-augmented query experiments."""

from .encoder import EmbeddingMatrix, EncoderConfig, base_vector, contextualize
from .evaluation import (
    Judgments,
    RunList,
    SigResult,
    bonferroni,
    map_metric,
    mrr_at_k,
    ndcg_at_k,
    paired_t_test,
    recall_at_k,
)
from .index import CandidateSet, TokenIndex, candidate_set, token_topk
from .perturb import ShiftReport, cyclic_correlations, shift_report, similarity_heatmap
from .pipeline import (
    PhaseConfig,
    SweepSpec,
    encode_query,
    mask_sweep,
    maxlen_experiment,
    remap_experiment,
    run_pipeline,
    swap_experiment,
)
from .remap import RemapCondition, remap
from .scoring import ScoredDoc, maxsim, rerank, row_max_similarities, weight_histogram
from .store import (
    CorpusStore,
    StoredPassage,
    StoreFormatError,
    read_store,
    write_store,
)
from .tokens import (
    AttentionMask,
    FixedMaskCount,
    MaskPolicy,
    OversizeQueryError,
    PadToTotalLength,
    SpecialTokens,
    TokenKind,
    TokenSeq,
    Vocabulary,
    build_attention_mask,
    build_query_input,
    swap_first_two_to_end,
    swap_what_is,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionMask",
    "CandidateSet",
    "CorpusStore",
    "EmbeddingMatrix",
    "EncoderConfig",
    "FixedMaskCount",
    "Judgments",
    "MaskPolicy",
    "OversizeQueryError",
    "PadToTotalLength",
    "PhaseConfig",
    "RemapCondition",
    "RunList",
    "ScoredDoc",
    "ShiftReport",
    "SigResult",
    "SpecialTokens",
    "StoreFormatError",
    "StoredPassage",
    "SweepSpec",
    "TokenIndex",
    "TokenKind",
    "TokenSeq",
    "Vocabulary",
    "base_vector",
    "bonferroni",
    "build_attention_mask",
    "build_query_input",
    "candidate_set",
    "contextualize",
    "cyclic_correlations",
    "encode_query",
    "map_metric",
    "mask_sweep",
    "maxlen_experiment",
    "maxsim",
    "mrr_at_k",
    "ndcg_at_k",
    "paired_t_test",
    "read_store",
    "recall_at_k",
    "remap",
    "remap_experiment",
    "rerank",
    "row_max_similarities",
    "run_pipeline",
    "shift_report",
    "similarity_heatmap",
    "swap_experiment",
    "swap_first_two_to_end",
    "swap_what_is",
    "token_topk",
    "weight_histogram",
    "write_store",
]
