"""Canonical on-disk sample format and in-memory dataset containers.

Samples are stored as line-delimited JSON, one record per line:

    {"id": "...", "domain": "...", "embedding": [...], "logits": [...],
     "label": 0, "text": "..."}

``text`` is optional.  Numbers are serialized in shortest round-trip
decimal form (Python's default float repr), so write -> load is an exact
identity for finite values.  A dataset directory may carry a
``manifest.json`` recording per-file SHA-256 checksums, the embedding
dimension, the number of choices, and the active profile.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    IncompatibleDatasets,
    LabelOutOfRange,
    ManifestError,
    ParseError,
    RecordError,
)

MMLU_EXCLUDED_POSITIONS = (1, 3, 5, 7, 9)


@dataclass(frozen=True)
class SampleRecord:
    """One prompt: its embedding, per-choice logits, and true label."""

    id: str
    domain: str
    embedding: tuple[float, ...]
    logits: tuple[float, ...]
    label: int
    text: str | None = None


@dataclass
class DomainDataset:
    """All samples of one domain, as arrays ready for vectorized scoring."""

    domain_id: str
    ids: list[str]
    embeddings: np.ndarray  # (n, d)
    logits: np.ndarray  # (n, K)
    labels: np.ndarray  # (n,)

    def __post_init__(self):
        if self.embeddings.shape[0] == 0:
            raise IncompatibleDatasets(f"domain {self.domain_id!r} has no samples")

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    @property
    def n_choices(self) -> int:
        return int(self.logits.shape[1])

    @classmethod
    def from_records(cls, records: list[SampleRecord], domain_id: str | None = None) -> "DomainDataset":
        if not records:
            raise IncompatibleDatasets("cannot build a dataset from zero records")
        domain = domain_id if domain_id is not None else records[0].domain
        return cls(
            domain_id=domain,
            ids=[r.id for r in records],
            embeddings=np.array([r.embedding for r in records], dtype=np.float64),
            logits=np.array([r.logits for r in records], dtype=np.float64),
            labels=np.array([r.label for r in records], dtype=np.int64),
        )

    def to_records(self) -> list[SampleRecord]:
        return [
            SampleRecord(
                id=self.ids[i],
                domain=self.domain_id,
                embedding=tuple(float(v) for v in self.embeddings[i]),
                logits=tuple(float(v) for v in self.logits[i]),
                label=int(self.labels[i]),
            )
            for i in range(self.n)
        ]


def _as_finite_floats(value, what: str, lineno: int) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ParseError(f"{what} must be a non-empty array", line=lineno)
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParseError(f"{what} contains a non-finite or non-numeric entry", line=lineno)
        out.append(float(v))
    return tuple(out)


def _parse_record(obj: dict, lineno: int, expected_d: int | None, expected_k: int | None) -> SampleRecord:
    for key in ("id", "domain", "embedding", "logits", "label"):
        if key not in obj:
            raise ParseError(f"missing field {key!r}", line=lineno)
    embedding = _as_finite_floats(obj["embedding"], "embedding", lineno)
    logits = _as_finite_floats(obj["logits"], "logits", lineno)
    if expected_d is not None and len(embedding) != expected_d:
        raise DimensionMismatch(
            f"embedding has {len(embedding)} dims, expected {expected_d}", line=lineno
        )
    if expected_k is not None and len(logits) != expected_k:
        raise DimensionMismatch(f"{len(logits)} logits, expected {expected_k}", line=lineno)
    if len(logits) < 2:
        raise DimensionMismatch("need at least 2 choices", line=lineno)
    label = obj["label"]
    if isinstance(label, bool) or not isinstance(label, int):
        raise ParseError("label must be an integer", line=lineno)
    if not 0 <= label < len(logits):
        raise LabelOutOfRange(f"label {label} outside [0, {len(logits)})", line=lineno)
    text = obj.get("text")
    if text is not None and not isinstance(text, str):
        raise ParseError("text must be a string", line=lineno)
    return SampleRecord(
        id=str(obj["id"]),
        domain=str(obj["domain"]),
        embedding=embedding,
        logits=logits,
        label=label,
        text=text,
    )


def load_samples(path, expected_d: int | None = None, expected_k: int | None = None) -> list[SampleRecord]:
    """Parse and validate a sample file; errors carry 1-based line numbers.

    Dimensions are checked against ``expected_d``/``expected_k`` when
    given, and always for consistency within the file (the first record
    fixes them).  No partially-valid file is silently accepted.
    """
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"sample file not found: {p}")
    records: list[SampleRecord] = []
    d, k = expected_d, expected_k
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from None
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("each line must be a JSON object", line=lineno)
        rec = _parse_record(obj, lineno, d, k)
        d, k = len(rec.embedding), len(rec.logits)
        records.append(rec)
    return records


def _reject_constant(name: str):
    raise ValueError(f"non-finite constant {name}")


def write_samples(records, path) -> None:
    """Write records as JSONL; refuses non-finite numerics.

    ``load_samples(write_samples(x)) == x`` exactly for finite values.
    """
    lines = []
    for i, rec in enumerate(records):
        values = list(rec.embedding) + list(rec.logits)
        if not all(math.isfinite(v) for v in values):
            raise RecordError(f"record {rec.id!r} (index {i}) has non-finite values")
        obj = {
            "id": rec.id,
            "domain": rec.domain,
            "embedding": list(rec.embedding),
            "logits": list(rec.logits),
            "label": rec.label,
        }
        if rec.text is not None:
            obj["text"] = rec.text
        lines.append(json.dumps(obj))
    Path(path).write_text("".join(line + "\n" for line in lines))


def apply_mmlu_profile(records: list) -> list:
    """Drop the fixed excluded positions (1, 3, 5, 7, 9); keep the rest.

    Positions are 0-based indices into the record list as loaded; records
    at other positions pass through untouched.
    """
    excluded = set(MMLU_EXCLUDED_POSITIONS)
    return [rec for pos, rec in enumerate(records) if pos not in excluded]


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    domain: str
    sha256: str


@dataclass(frozen=True)
class DatasetManifest:
    files: tuple[ManifestEntry, ...]
    d: int
    k: int
    profile: str = "generic"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.profile not in ("generic", "mmlu"):
            raise ManifestError(f"unknown profile {self.profile!r}")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def save_manifest(manifest: DatasetManifest, path) -> None:
    payload = {
        "files": [{"path": e.path, "domain": e.domain, "sha256": e.sha256} for e in manifest.files],
        "d": manifest.d,
        "k": manifest.k,
        "profile": manifest.profile,
        "extra": manifest.extra,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(path, verify: bool = True) -> DatasetManifest:
    """Read a manifest; with ``verify`` (default) checksum every file.

    A hash mismatch raises :class:`ManifestError` before any sample is
    parsed.
    """
    p = Path(path)
    if not p.is_file():
        raise ManifestError(f"manifest not found: {p}")
    try:
        payload = json.loads(p.read_text())
        entries = tuple(
            ManifestEntry(path=f["path"], domain=f["domain"], sha256=f["sha256"])
            for f in payload["files"]
        )
        manifest = DatasetManifest(
            files=entries,
            d=int(payload["d"]),
            k=int(payload["k"]),
            profile=payload.get("profile", "generic"),
            extra=dict(payload.get("extra", {})),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed manifest {p}: {exc}") from None
    if verify:
        base = p.parent
        for entry in manifest.files:
            target = base / entry.path
            if not target.is_file():
                raise ManifestError(f"manifest references missing file {target}")
            actual = sha256_file(target)
            if actual != entry.sha256:
                raise ManifestError(
                    f"checksum mismatch for {target}: manifest {entry.sha256}, actual {actual}"
                )
    return manifest


def load_domain(path, expected_d: int | None = None, expected_k: int | None = None,
                mmlu_profile: bool = False, domain_id: str | None = None) -> DomainDataset:
    """Load one sample file into a :class:`DomainDataset`."""
    records = load_samples(path, expected_d, expected_k)
    if mmlu_profile:
        records = apply_mmlu_profile(records)
    return DomainDataset.from_records(records, domain_id=domain_id)
