import json

import pytest
import torch
from transformers import BertConfig, BertModel

from helpers import VOCAB_WORDS


@pytest.fixture(scope="session")
def tiny_encoder(tmp_path_factory) -> str:
    """A directory loadable by AutoModel/AutoTokenizer: random weights, tiny dims."""
    root = tmp_path_factory.mktemp("tinyenc")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", *VOCAB_WORDS]
    (root / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    (root / "tokenizer_config.json").write_text(
        json.dumps({"tokenizer_class": "BertTokenizer", "do_lower_case": True}),
        encoding="utf-8",
    )
    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    BertModel(config).save_pretrained(root)
    return str(root)
