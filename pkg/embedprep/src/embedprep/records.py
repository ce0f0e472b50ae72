"""Raw question records and the canonical sample-record output format.

Raw records (this tool's input) are line-delimited JSON:

    {"id": "...", "domain": "...", "text": "...", "choices": [...],
     "label": 0, "logits": [...]}

``choices``, ``label`` and ``logits`` may be absent at parse time, but a
record can only be embedded into the canonical format when both label
and logits are present.

The output is the sample-record format consumed by the driftcal loader,
byte-compatible by construction:

    {"id": ..., "domain": ..., "embedding": [...], "logits": [...],
     "label": ..., "text": ...}

one JSON object per LF-terminated line, numbers in shortest round-trip
decimal form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError


@dataclass(frozen=True)
class RawQuestionRecord:
    id: str
    domain: str
    text: str
    choices: tuple[str, ...] | None = None
    label: int | None = None
    logits: tuple[float, ...] | None = None

    @property
    def n_choices(self) -> int | None:
        if self.logits is not None:
            return len(self.logits)
        if self.choices is not None:
            return len(self.choices)
        return None


def _floats(value, what: str, where: int) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise SchemaError(f"{what} must be a non-empty array", where)
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SchemaError(f"{what} contains a non-numeric or non-finite entry", where)
        out.append(float(v))
    return tuple(out)


def parse_raw_record(obj: dict, where: int) -> RawQuestionRecord:
    for key in ("id", "domain", "text"):
        if key not in obj:
            raise SchemaError(f"missing field {key!r}", where)
    text = obj["text"]
    if not isinstance(text, str) or not text.strip():
        raise SchemaError("text must be a non-empty string", where)

    choices = None
    if obj.get("choices") is not None:
        raw = obj["choices"]
        if not isinstance(raw, list) or not all(isinstance(c, str) for c in raw):
            raise SchemaError("choices must be an array of strings", where)
        choices = tuple(raw)

    logits = None
    if obj.get("logits") is not None:
        logits = _floats(obj["logits"], "logits", where)

    label = obj.get("label")
    if label is not None:
        if isinstance(label, bool) or not isinstance(label, int):
            raise SchemaError("label must be an integer", where)
        k = len(logits) if logits is not None else (len(choices) if choices else None)
        if k is not None and not 0 <= label < k:
            raise SchemaError(f"label {label} outside [0, {k})", where)

    return RawQuestionRecord(
        id=str(obj["id"]), domain=str(obj["domain"]), text=text,
        choices=choices, label=label, logits=logits,
    )


def load_raw_records(path) -> list[RawQuestionRecord]:
    """Parse a raw-question JSONL file; errors carry 1-based line numbers."""
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"input file not found: {p}")
    records = []
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(obj, dict):
            raise SchemaError("each line must be a JSON object", lineno)
        records.append(parse_raw_record(obj, lineno))
    return records


def write_raw_records(records, path) -> None:
    lines = []
    for rec in records:
        obj: dict = {"id": rec.id, "domain": rec.domain, "text": rec.text}
        if rec.choices is not None:
            obj["choices"] = list(rec.choices)
        if rec.label is not None:
            obj["label"] = rec.label
        if rec.logits is not None:
            obj["logits"] = list(rec.logits)
        lines.append(json.dumps(obj))
    Path(path).write_text("".join(line + "\n" for line in lines))


def write_sample_records(rows, path) -> None:
    """Write canonical sample records.

    ``rows`` are dicts with id, domain, embedding, logits, label and
    optional text; numbers must be finite.
    """
    lines = []
    for i, row in enumerate(rows):
        values = list(row["embedding"]) + list(row["logits"])
        if not all(math.isfinite(v) for v in values):
            raise SchemaError("non-finite numeric value", i)
        obj = {
            "id": row["id"],
            "domain": row["domain"],
            "embedding": [float(v) for v in row["embedding"]],
            "logits": [float(v) for v in row["logits"]],
            "label": int(row["label"]),
        }
        if row.get("text") is not None:
            obj["text"] = row["text"]
        lines.append(json.dumps(obj))
    Path(path).write_text("".join(line + "\n" for line in lines))


def write_manifest(path, files, d: int, k: int, extra: dict) -> None:
    """Same manifest layout the primary loader verifies."""
    payload = {
        "files": files,
        "d": d,
        "k": k,
        "profile": "generic",
        "extra": extra,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def sha256_file(path) -> str:
    import hashlib

    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()
