"""Secondary acceptance: outputs must enter the primary pipeline cleanly.

* a 100-question fixture embeds with zero loader errors,
* the default model family emits 384-dimensional vectors,
* re-running produces identical vectors,
* a converted pickle chained through the embedder loads cleanly too.

When the pinned production checkpoint cannot be fetched (offline
sandbox), the locally built 384-dim sentence transformer stands in; it
runs the same encoding path and output dimension.
"""

import json
import pickle

import numpy as np
import pytest

from embedprep.convert import convert_logits
from embedprep.embed import DEFAULT_MODEL_ID, embed_file, load_embedder
from embedprep.errors import ModelLoadError

driftcal_dataio = pytest.importorskip(
    "driftcal.dataio", reason="primary package needed for cross-validation")


@pytest.fixture(scope="module")
def hundred_question_fixture(tmp_path_factory):
    rng = np.random.default_rng(92)
    path = tmp_path_factory.mktemp("fixture") / "questions.jsonl"
    rows = []
    for i in range(100):
        rows.append({
            "id": f"q{i:04d}",
            "domain": "fixture",
            "text": f"question {i}: which of the following best describes item {i % 7}?",
            "choices": [f"option {j} for {i}" for j in range(6)],
            "label": int(rng.integers(0, 6)),
            "logits": [float(v) for v in rng.normal(size=6)],
        })
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


@pytest.fixture(scope="module")
def default_family_model(tmp_path_factory):
    """The pinned default checkpoint, or the offline 384-dim stand-in."""
    try:
        load_embedder(DEFAULT_MODEL_ID)
        return DEFAULT_MODEL_ID
    except ModelLoadError:
        from conftest import build_local_st_model

        return build_local_st_model(tmp_path_factory.mktemp("standin-model"))


def test_outputs_validate_against_primary_loader(tmp_path, hundred_question_fixture,
                                                 default_family_model):
    out = tmp_path / "samples.jsonl"
    n = embed_file(hundred_question_fixture, out, model_id=default_family_model)
    assert n == 100

    records = driftcal_dataio.load_samples(out, expected_d=384, expected_k=6)
    assert len(records) == 100  # zero validation errors, all rows parsed
    dataset = driftcal_dataio.DomainDataset.from_records(records)
    assert dataset.dim == 384 and dataset.n_choices == 6

    manifest = driftcal_dataio.load_manifest(tmp_path / "manifest.json", verify=True)
    assert manifest.d == 384 and manifest.k == 6


def test_rerun_produces_identical_vectors(tmp_path, hundred_question_fixture,
                                          default_family_model):
    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    embed_file(hundred_question_fixture, out1, model_id=default_family_model,
               manifest_path=tmp_path / "m1.json")
    embed_file(hundred_question_fixture, out2, model_id=default_family_model,
               manifest_path=tmp_path / "m2.json")
    assert out1.read_bytes() == out2.read_bytes()


def test_converted_pickle_chains_into_primary_loader(tmp_path, default_family_model):
    rng = np.random.default_rng(93)
    payload = []
    for i in range(10):
        payload.append({
            "id": f"u{i}",
            "question": f"upstream question {i}",
            "logits": [float(v) for v in rng.normal(size=6)],
            "answer": int(rng.integers(0, 6)),
            "subject": "philosophy",
        })
    src = tmp_path / "dump.pkl"
    with src.open("wb") as fh:
        pickle.dump(payload, fh)

    raw = tmp_path / "raw.jsonl"
    assert convert_logits(src, raw, mmlu_profile=True) == 5

    out = tmp_path / "samples.jsonl"
    embed_file(raw, out, model_id=default_family_model)
    records = driftcal_dataio.load_samples(out, expected_d=384, expected_k=6)
    assert [r.id for r in records] == ["u0", "u2", "u4", "u6", "u8"]
