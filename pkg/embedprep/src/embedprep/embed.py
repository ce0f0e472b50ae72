"""Text-embedding backends and the raw-to-canonical conversion.

The default backend is a pinned SentenceTransformer
(``all-MiniLM-L6-v2``, 384 dimensions).  A model id of the form
``hashed-<d>`` selects a built-in feature-hashing embedder instead: it
is deterministic, dependency-free and works offline, but carries no
semantic structure, so it is meant for plumbing tests and air-gapped
smoke runs, not production calibration.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np

from .errors import ModelLoadError, SchemaError
from .records import (
    RawQuestionRecord,
    load_raw_records,
    sha256_file,
    write_manifest,
    write_sample_records,
)

DEFAULT_MODEL_ID = "all-MiniLM-L6-v2"
_HASHED_RE = re.compile(r"^hashed-(\d+)$")
_TOKEN_RE = re.compile(r"[a-z0-9]+")


class HashedEmbedder:
    """Deterministic bag-of-ngrams feature hashing onto d dimensions."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ModelLoadError(f"hashed embedder needs dim >= 1, got {dim}")
        self.dim = dim
        self.version = "hashed-1"

    def _features(self, text: str):
        tokens = _TOKEN_RE.findall(text.lower())
        for tok in tokens:
            yield tok
            padded = f"#{tok}#"
            for i in range(len(padded) - 2):
                yield padded[i : i + 3]

    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            for feat in self._features(text):
                digest = hashlib.sha256(feat.encode("utf-8")).digest()
                idx = int.from_bytes(digest[:4], "big") % self.dim
                sign = 1.0 if digest[4] & 1 else -1.0
                out[row, idx] += sign
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out


class SentenceTransformerEmbedder:
    """Thin wrapper over sentence-transformers with a pinned identifier."""

    def __init__(self, model_id: str):
        try:
            import sentence_transformers
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelLoadError(f"sentence-transformers is not installed: {exc}") from None
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise ModelLoadError(f"cannot load embedding model {model_id!r}: {exc}") from None
        getter = getattr(self._model, "get_embedding_dimension",
                         getattr(self._model, "get_sentence_embedding_dimension", None))
        self.dim = int(getter())
        self.version = f"sentence-transformers/{sentence_transformers.__version__}"

    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        return np.asarray(
            self._model.encode(texts, batch_size=batch_size, convert_to_numpy=True,
                               show_progress_bar=False),
            dtype=np.float64,
        )


def load_embedder(model_id: str):
    match = _HASHED_RE.match(model_id)
    if match:
        return HashedEmbedder(int(match.group(1)))
    return SentenceTransformerEmbedder(model_id)


def record_text(rec: RawQuestionRecord, with_choices: bool) -> str:
    """Question text alone by default; choices appended when requested."""
    if not with_choices or not rec.choices:
        return rec.text
    return rec.text + "\n" + "\n".join(rec.choices)


def embed_records(records: list[RawQuestionRecord], embedder, batch_size: int = 32,
                  with_choices: bool = False, normalize: bool = False):
    """Embed raw records into canonical sample rows.

    Every record must carry logits and a label (the canonical format
    requires both); violations report the record's position.
    """
    for where, rec in enumerate(records, start=1):
        if rec.logits is None:
            raise SchemaError("record has no logits; cannot emit a sample record", where)
        if rec.label is None:
            raise SchemaError("record has no label; cannot emit a sample record", where)
        if len(rec.logits) < 2:
            raise SchemaError("need at least 2 choices", where)

    texts = [record_text(rec, with_choices) for rec in records]
    if texts:
        vectors = embedder.encode(texts, batch_size=batch_size)
        if normalize:
            norms = np.linalg.norm(vectors, axis=1, keepdims=True)
            vectors = np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)
    else:
        vectors = np.zeros((0, embedder.dim))

    rows = []
    for rec, vec in zip(records, vectors):
        rows.append({
            "id": rec.id,
            "domain": rec.domain,
            "embedding": [float(v) for v in vec],
            "logits": list(rec.logits),
            "label": int(rec.label),
            "text": rec.text,
        })
    return rows


def embed_file(in_path, out_path, model_id: str = DEFAULT_MODEL_ID,
               batch_size: int = 32, with_choices: bool = False,
               normalize: bool = False, manifest_path=None) -> int:
    """Embed a raw-question file into a sample-record file plus manifest.

    Returns the number of records written.  The manifest pins the model
    identifier and backend version so runs are reproducible.
    """
    records = load_raw_records(in_path)
    ks = {rec.n_choices for rec in records if rec.n_choices is not None}
    if len(ks) > 1:
        raise SchemaError(f"mixed choice counts in input: {sorted(ks)}")
    embedder = load_embedder(model_id)
    rows = embed_records(records, embedder, batch_size=batch_size,
                         with_choices=with_choices, normalize=normalize)
    out_path = Path(out_path)
    write_sample_records(rows, out_path)

    manifest_path = Path(manifest_path) if manifest_path else out_path.with_name("manifest.json")
    domains = sorted({rec.domain for rec in records})
    write_manifest(
        manifest_path,
        files=[{
            "path": out_path.name,
            "domain": domains[0] if len(domains) == 1 else "mixed",
            "sha256": sha256_file(out_path),
        }],
        d=embedder.dim,
        k=(ks.pop() if ks else 0),
        extra={
            "model_id": model_id,
            "model_version": embedder.version,
            "with_choices": with_choices,
            "normalize": normalize,
            "n_records": len(rows),
        },
    )
    return len(rows)
