"""Dataset preparation for domain-shift-aware conformal calibration:
embed question text into semantic vectors and convert upstream logit
dumps into the canonical sample-record format."""

from .convert import convert_logits
from .embed import DEFAULT_MODEL_ID, HashedEmbedder, embed_file, load_embedder
from .errors import EmbedPrepError, ModelLoadError, SchemaError
from .records import RawQuestionRecord, load_raw_records, write_raw_records

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL_ID",
    "EmbedPrepError",
    "HashedEmbedder",
    "ModelLoadError",
    "RawQuestionRecord",
    "SchemaError",
    "convert_logits",
    "embed_file",
    "load_embedder",
    "load_raw_records",
    "write_raw_records",
    "__version__",
]
