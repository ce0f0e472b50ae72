"""Convert upstream pickled logit dumps into raw-question records.

Assumed pickle schema (``uncertainty-bench``, the only documented one):
the file unpickles to a list of dicts, each carrying

    "question"          str, the prompt text            (required)
    "logits"            sequence of K floats            (required)
    "answer" | "label"  int in [0, K) or letter 'A'..   (required)
    "id"                str or int                      (optional; falls
                                                         back to position)
    "choices"           list of K strings               (optional)
    "subject"|"domain"  str                             (optional; falls
                                                         back to --domain)

A schema violation reports the offending record index and field.  With
the MMLU profile active, list positions 1, 3, 5, 7 and 9 are dropped
and exactly six choices are required.
"""

from __future__ import annotations

import pickle
from pathlib import Path

from .errors import SchemaError
from .records import RawQuestionRecord, write_raw_records

MMLU_EXCLUDED_POSITIONS = (1, 3, 5, 7, 9)
SCHEMAS = ("uncertainty-bench",)


def _label_from(value, k: int, where: int) -> int:
    if isinstance(value, bool):
        raise SchemaError("label must be an integer or a choice letter", where)
    if isinstance(value, int):
        label = value
    elif isinstance(value, str) and len(value) == 1 and value.isalpha():
        label = ord(value.upper()) - ord("A")
    else:
        raise SchemaError(f"cannot interpret label {value!r}", where)
    if not 0 <= label < k:
        raise SchemaError(f"label {label} outside [0, {k})", where)
    return label


def _one_record(obj, index: int, default_domain: str, mmlu_profile: bool) -> RawQuestionRecord:
    if not isinstance(obj, dict):
        raise SchemaError("expected a dict record", index)
    if "question" not in obj:
        raise SchemaError("missing field 'question'", index)
    text = obj["question"]
    if not isinstance(text, str) or not text.strip():
        raise SchemaError("'question' must be a non-empty string", index)
    if "logits" not in obj:
        raise SchemaError("missing field 'logits'", index)
    try:
        logits = tuple(float(v) for v in obj["logits"])
    except (TypeError, ValueError):
        raise SchemaError("'logits' must be a sequence of numbers", index) from None
    if len(logits) < 2:
        raise SchemaError("need at least 2 logits", index)
    if mmlu_profile and len(logits) != 6:
        raise SchemaError(f"MMLU profile expects 6 logits, got {len(logits)}", index)

    raw_label = obj.get("answer", obj.get("label"))
    if raw_label is None:
        raise SchemaError("missing field 'answer'/'label'", index)
    label = _label_from(raw_label, len(logits), index)

    choices = None
    if obj.get("choices") is not None:
        raw = obj["choices"]
        if not isinstance(raw, (list, tuple)) or not all(isinstance(c, str) for c in raw):
            raise SchemaError("'choices' must be a list of strings", index)
        if len(raw) != len(logits):
            raise SchemaError(f"{len(raw)} choices vs {len(logits)} logits", index)
        choices = tuple(raw)

    domain = obj.get("subject", obj.get("domain", default_domain))
    return RawQuestionRecord(
        id=str(obj.get("id", index)),
        domain=str(domain),
        text=text,
        choices=choices,
        label=label,
        logits=logits,
    )


def convert_logits(in_pickle_path, out_path, schema: str = "uncertainty-bench",
                   mmlu_profile: bool = False, default_domain: str = "mmlu") -> int:
    """Read a pickled logit dump and write raw-question records.

    Returns the number of records written.  Chain the output through
    ``embedprep embed`` to obtain canonical sample records.
    """
    if schema not in SCHEMAS:
        raise SchemaError(f"unknown schema {schema!r}; known: {', '.join(SCHEMAS)}")
    path = Path(in_pickle_path)
    if not path.is_file():
        raise SchemaError(f"pickle file not found: {path}")
    try:
        with path.open("rb") as fh:
            payload = pickle.load(fh)
    except (pickle.UnpicklingError, EOFError) as exc:
        raise SchemaError(f"cannot unpickle {path}: {exc}") from None
    if not isinstance(payload, list):
        raise SchemaError(f"expected a list at the top level, got {type(payload).__name__}")

    records = [
        _one_record(obj, index, default_domain, mmlu_profile)
        for index, obj in enumerate(payload)
    ]
    if mmlu_profile:
        excluded = set(MMLU_EXCLUDED_POSITIONS)
        records = [rec for pos, rec in enumerate(records) if pos not in excluded]
    write_raw_records(records, out_path)
    return len(records)
