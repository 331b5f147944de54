"""Export jobs: pack per-utterance speaker embeddings and phone alignments
into the file formats the evaluation toolkit consumes (EMB1 binary matrix,
JSON Lines manifest).

This package only serializes. Encoders and phone recognizers are plugged
in as plain callables, so nothing here depends on any model runtime; the
formats are the whole contract with the toolkit.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, EncodeError, JobError, JobFormatError, LabelError

EMB1_MAGIC = b"EMB1"

# stress-free pronouncing-dictionary phone labels, plus silence
PHONE_LABELS: tuple[str, ...] = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH",
    "EH", "ER", "EY", "F", "G", "HH", "IH", "IY", "JH", "K",
    "L", "M", "N", "NG", "OW", "OY", "P", "R", "S", "SH",
    "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH", "SIL",
)
_KNOWN = frozenset(PHONE_LABELS)


@dataclass(frozen=True)
class UtteranceItem:
    """One utterance to export.

    `source` is an opaque reference (path, URI, dataset key) handed to the
    encoder; this package never opens it. `extra` carries free-form data
    for encoders/aligners, e.g. precomputed vectors or alignments.
    """

    utterance_id: str
    speaker_id: str
    duration_seconds: float
    source: str | None = None
    extra: Mapping | None = None


Encoder = Callable[[UtteranceItem], Sequence[float]]
Aligner = Callable[[UtteranceItem], Sequence]


@dataclass(frozen=True)
class ExportJob:
    """What to export and where.

    `dim` optionally declares the embedding dimension up front; it is
    enforced against encoder output and decides the header of an empty
    embedding export (default 1).
    """

    items: tuple[UtteranceItem, ...]
    out_dir: Path
    encoder: Encoder | None = None
    aligner: Aligner | None = None
    dim: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.dim is not None and self.dim < 1:
            raise JobFormatError(f"declared dim must be positive, got {self.dim}")
        seen: set[str] = set()
        for item in self.items:
            if not item.utterance_id or not isinstance(item.utterance_id, str):
                raise JobFormatError("utterance_id must be a non-empty string")
            if not item.speaker_id or not isinstance(item.speaker_id, str):
                raise JobFormatError(f"{item.utterance_id!r}: speaker_id must be a non-empty string")
            dur = item.duration_seconds
            if not isinstance(dur, (int, float)) or isinstance(dur, bool) \
                    or not math.isfinite(dur) or dur <= 0:
                raise JobFormatError(
                    f"{item.utterance_id!r}: duration_seconds must be positive and finite"
                )
            if item.utterance_id in seen:
                raise JobFormatError(f"duplicate utterance_id {item.utterance_id!r}")
            seen.add(item.utterance_id)


def _write_manifest(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")


def export_embeddings(job: ExportJob) -> tuple[Path, Path]:
    """Encode every item and write embeddings.emb1 + manifest.jsonl.

    One matrix row per utterance, in item order; `embedding_row` in the
    manifest indexes it. The dimension must not drift mid-job, vectors
    must be finite and not all-zero (the toolkit's loader rejects
    zero-norm rows, so producing one would only defer the error).
    """
    if job.encoder is None:
        raise JobFormatError("job has no encoder")
    dim = job.dim
    rows: list[np.ndarray] = []
    manifest: list[dict] = []
    for i, item in enumerate(job.items):
        try:
            raw = job.encoder(item)
        except JobError:
            raise
        except Exception as exc:
            raise EncodeError(f"encoder failed on {item.utterance_id!r}: {exc}") from exc
        vec = np.asarray(raw, dtype=np.float32)
        if vec.ndim != 1 or vec.size < 1:
            raise EncodeError(
                f"{item.utterance_id!r}: encoder must return a non-empty 1-D vector"
            )
        if not np.all(np.isfinite(vec)):
            raise EncodeError(f"{item.utterance_id!r}: vector has non-finite values")
        if not np.any(vec):
            raise EncodeError(f"{item.utterance_id!r}: vector is all zeros")
        if dim is None:
            dim = int(vec.size)
        elif vec.size != dim:
            raise DimensionError(
                f"{item.utterance_id!r} produced a {vec.size}-dim vector; job is {dim}-dim"
            )
        rows.append(vec)
        manifest.append({
            "utterance_id": item.utterance_id,
            "speaker_id": item.speaker_id,
            "duration_seconds": item.duration_seconds,
            "embedding_row": i,
        })

    job.out_dir.mkdir(parents=True, exist_ok=True)
    emb_path = job.out_dir / "embeddings.emb1"
    header_dim = dim if dim is not None else 1
    with open(emb_path, "wb") as fh:
        fh.write(EMB1_MAGIC)
        fh.write(struct.pack("<II", len(rows), header_dim))
        for vec in rows:
            fh.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())
    manifest_path = job.out_dir / "manifest.jsonl"
    _write_manifest(manifest_path, manifest)
    return manifest_path, emb_path


def _phones_from_extra(item: UtteranceItem):
    if not item.extra or "phones" not in item.extra:
        raise JobFormatError(f"{item.utterance_id!r} carries no phones")
    return item.extra["phones"]


def normalize_label(raw: str) -> str:
    """Uppercase and strip trailing stress digits."""
    return str(raw).upper().rstrip("0123456789")


def export_alignments(job: ExportJob) -> Path:
    """Write manifest.jsonl with a `phones` field per utterance.

    Labels are normalized (uppercased, stress digits stripped) and must
    fall inside the 39-phone-plus-SIL alphabet; durations stay in the
    recognizer's frame unit and must be positive.
    """
    aligner = job.aligner if job.aligner is not None else _phones_from_extra
    manifest: list[dict] = []
    for item in job.items:
        try:
            pairs = aligner(item)
        except JobError:
            raise
        except Exception as exc:
            raise EncodeError(f"aligner failed on {item.utterance_id!r}: {exc}") from exc
        phones: list[list] = []
        for k, pair in enumerate(pairs):
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise JobFormatError(
                    f"{item.utterance_id!r}: phones[{k}] must be a [label, duration] pair"
                )
            label = normalize_label(pair[0])
            if label not in _KNOWN:
                raise LabelError(
                    f"unknown phone label {pair[0]!r} in {item.utterance_id!r}"
                )
            dur = pair[1]
            if not isinstance(dur, (int, float)) or isinstance(dur, bool) \
                    or not math.isfinite(dur) or dur <= 0:
                raise JobFormatError(
                    f"{item.utterance_id!r}: phones[{k}] duration must be positive"
                )
            phones.append([label, dur])
        manifest.append({
            "utterance_id": item.utterance_id,
            "speaker_id": item.speaker_id,
            "duration_seconds": item.duration_seconds,
            "phones": phones,
        })
    job.out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = job.out_dir / "manifest.jsonl"
    _write_manifest(manifest_path, manifest)
    return manifest_path


# ---------------------------------------------------------------- encoders


def inline_encoder(item: UtteranceItem) -> Sequence[float]:
    """Vectors precomputed elsewhere ride along in extra["embedding"]."""
    if not item.extra or "embedding" not in item.extra:
        raise EncodeError(f"{item.utterance_id!r} carries no inline embedding")
    return item.extra["embedding"]


def hash_encoder(dim: int) -> Encoder:
    """Deterministic pseudo-embedding from a digest of the source reference.

    Carries no speaker information; useful only for exercising the
    plumbing without a model.
    """
    if dim < 1:
        raise JobFormatError(f"hash encoder dim must be positive, got {dim}")

    def encode(item: UtteranceItem) -> Sequence[float]:
        key = (item.source or item.utterance_id).encode("utf-8")
        digest = hashlib.blake2b(key, digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        return rng.standard_normal(dim)

    return encode
