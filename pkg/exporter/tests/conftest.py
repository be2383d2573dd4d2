import pytest
import torch
from transformers import BertConfig, BertModel

TINY_VOCAB = [
    "[PAD]",
    "[unused0]",
    "[unused1]",
    "[UNK]",
    "[CLS]",
    "[SEP]",
    "[MASK]",
    "what",
    "is",
    "love",
    "cost",
    "of",
    "swim",
    "spa",
    "a",
    "the",
    "baby",
    "don",
    "'",
    "t",
    "hurt",
    "me",
    "no",
    "more",
    ".",
    ",",
    "water",
    "heat",
    "pump",
    "calculus",
    "period",
]

HIDDEN = 32
PROJECTED_DIM = 16


def build_checkpoint(directory, with_projection=True, max_positions=160):
    (directory / "vocab.txt").write_text("\n".join(TINY_VOCAB) + "\n", encoding="utf-8")
    cfg = BertConfig(
        vocab_size=len(TINY_VOCAB),
        hidden_size=HIDDEN,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=max_positions,
    )
    torch.manual_seed(7)
    model = BertModel(cfg)
    state = {f"bert.{k}": v for k, v in model.state_dict().items()}
    if with_projection:
        gen = torch.Generator().manual_seed(11)
        state["linear.weight"] = torch.randn(PROJECTED_DIM, HIDDEN, generator=gen)
    torch.save(state, directory / "pytorch_model.bin")
    cfg.save_pretrained(directory)
    return directory


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    return build_checkpoint(tmp_path_factory.mktemp("ckpt"))


@pytest.fixture(scope="session")
def bare_checkpoint(tmp_path_factory):
    """Same encoder without the projection head."""
    return build_checkpoint(tmp_path_factory.mktemp("ckpt_bare"), with_projection=False)


@pytest.fixture(scope="session")
def query_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "queries.tsv"
    path.write_text(
        "1\twhat is love\n"
        "2\tcost of swim spa\n"
        "3\tthe baby don ' t hurt me\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture(scope="session")
def collection_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "collection.tsv"
    path.write_text(
        "10\tlove is what the baby is . no more hurt .\n"
        "11\tswim spa cost , water heat pump .\n",
        encoding="utf-8",
    )
    return path
