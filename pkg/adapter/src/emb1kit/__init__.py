from .errors import DimensionError, EncodeError, JobError, JobFormatError, LabelError
from .jobs import (
    EMB1_MAGIC,
    PHONE_LABELS,
    ExportJob,
    UtteranceItem,
    export_alignments,
    export_embeddings,
    hash_encoder,
    inline_encoder,
)

__all__ = [
    "DimensionError",
    "EncodeError",
    "JobError",
    "JobFormatError",
    "LabelError",
    "EMB1_MAGIC",
    "PHONE_LABELS",
    "ExportJob",
    "UtteranceItem",
    "export_alignments",
    "export_embeddings",
    "hash_encoder",
    "inline_encoder",
]
