"""Checkpoint loading: BERT-style encoder plus the retrieval projection head.

Retrieval checkpoints of this family ship a plain BERT state dict under a
``bert.`` prefix along with a ``linear.weight`` projection that maps hidden
states to the (smaller) scoring space. The projection is read straight from
the weight file since the encoder class has no slot for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch
from transformers import AutoModel, AutoTokenizer

QUERY_MARKER = "[unused0]"
DOC_MARKER = "[unused1]"


@dataclass
class LoadedCheckpoint:
    tokenizer: object
    model: torch.nn.Module
    projection: Optional[torch.Tensor]  # (dim, hidden) or None for identity
    dim: int
    position_limit: int

    @property
    def query_marker_id(self) -> int:
        return self._marker_id(QUERY_MARKER)

    @property
    def doc_marker_id(self) -> int:
        return self._marker_id(DOC_MARKER)

    def _marker_id(self, token: str) -> int:
        tid = self.tokenizer.convert_tokens_to_ids(token)
        if tid is None or tid == self.tokenizer.unk_token_id:
            raise ValueError(f"checkpoint vocabulary lacks the {token} marker")
        return tid


def _find_projection(path: Path) -> Optional[torch.Tensor]:
    safetensors_file = path / "model.safetensors"
    if safetensors_file.exists():
        from safetensors.torch import load_file

        state = load_file(str(safetensors_file))
        return state.get("linear.weight")
    bin_file = path / "pytorch_model.bin"
    if bin_file.exists():
        state = torch.load(bin_file, map_location="cpu", weights_only=True)
        return state.get("linear.weight")
    return None


def load_checkpoint(checkpoint: str) -> LoadedCheckpoint:
    path = Path(checkpoint)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {checkpoint} not found")
    tokenizer = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModel.from_pretrained(checkpoint)
    model.eval()
    projection = _find_projection(path)
    hidden = model.config.hidden_size
    if projection is not None:
        if projection.shape[1] != hidden:
            raise ValueError(
                f"projection maps from {projection.shape[1]} dims, model hidden size is {hidden}"
            )
        projection = projection.to(torch.float32)
        dim = projection.shape[0]
    else:
        dim = hidden
    return LoadedCheckpoint(
        tokenizer=tokenizer,
        model=model,
        projection=projection,
        dim=dim,
        position_limit=int(model.config.max_position_embeddings),
    )
