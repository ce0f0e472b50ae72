"""Fixtures shared by the embedprep tests.

The pinned production model may be unavailable offline, so the
integration tests fall back to a locally constructed sentence
transformer with the same 384-dimensional output; building it exercises
the real encoding path end to end.
"""

import json

import numpy as np
import pytest


def build_local_st_model(root) -> str:
    """Construct and save a tiny 384-dim sentence-transformers model."""
    torch = pytest.importorskip("torch")
    transformers = pytest.importorskip("transformers")
    st = pytest.importorskip("sentence_transformers")
    st_models = pytest.importorskip("sentence_transformers.models")

    vocab = (
        ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
        + [chr(c) for c in range(ord("a"), ord("z") + 1)]
        + ["##" + chr(c) for c in range(ord("a"), ord("z") + 1)]
        + [str(d) for d in range(10)]
    )
    vocab_path = root / "vocab.txt"
    vocab_path.write_text("\n".join(vocab))
    tokenizer = transformers.BertTokenizer(vocab_file=str(vocab_path))
    config = transformers.BertConfig(
        vocab_size=len(vocab), hidden_size=384, num_hidden_layers=2,
        num_attention_heads=6, intermediate_size=512, max_position_embeddings=128,
    )
    torch.manual_seed(0)
    bert = transformers.BertModel(config)
    hf_dir = root / "hf"
    bert.save_pretrained(hf_dir)
    tokenizer.save_pretrained(hf_dir)

    word = st_models.Transformer(str(hf_dir), max_seq_length=128)
    pooling = st_models.Pooling(384, pooling_mode="mean")
    model = st.SentenceTransformer(modules=[word, pooling])
    out_dir = root / "st"
    model.save(str(out_dir))
    return str(out_dir)


@pytest.fixture(scope="session")
def local_st_model_dir(tmp_path_factory):
    return build_local_st_model(tmp_path_factory.mktemp("local-model"))


@pytest.fixture
def raw_question_file(tmp_path):
    """A small raw-question fixture with logits and labels."""
    rng = np.random.default_rng(90)
    path = tmp_path / "raw.jsonl"
    rows = []
    for i in range(12):
        rows.append({
            "id": f"q{i:03d}",
            "domain": "fixture",
            "text": f"sample question number {i} about topic {i % 3}",
            "choices": [f"choice {j}" for j in range(4)],
            "label": int(rng.integers(0, 4)),
            "logits": [float(v) for v in rng.normal(size=4)],
        })
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path
