"""Corpus loading, validation, filtering, and trial/enrollment splitting.

File formats:
  * manifest: JSON Lines, one utterance per line with keys `utterance_id`,
    `speaker_id`, `duration_seconds`, optional `transcript`, optional
    `phones` (array of [label, duration_frames] pairs), optional
    `embedding_row`.
  * embeddings: EMB1 binary. Bytes 0-3 magic b"EMB1", bytes 4-7 u32-LE row
    count, bytes 8-11 u32-LE dimension, then count*dim IEEE-754 float32-LE
    values in row-major order.
  * demographics: UTF-8 CSV with header `speaker_id,<attr1>,<attr2>,...`;
    empty cells mean the speaker has no value for that attribute.

Loaded corpora are immutable by convention: nothing in this package
mutates records after loading, so they are safe to share across threads.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import EmbeddingFormatError, ManifestError, PreconditionError, SplitError

EMB1_MAGIC = b"EMB1"

_MANIFEST_KEYS = {
    "utterance_id",
    "speaker_id",
    "duration_seconds",
    "transcript",
    "phones",
    "embedding_row",
}


@dataclass
class UtteranceRecord:
    utterance_id: str
    speaker_id: str
    duration_seconds: float
    transcript: str | None = None
    phone_alignment: list[tuple[str, float]] | None = None
    embedding_row: int | None = None
    split: str = "unassigned"  # unassigned | trial | enrollment


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense matrix of speaker-embedding vectors, one row per utterance."""

    rows: np.ndarray  # (n, dim) float32

    def __post_init__(self):
        if self.rows.ndim != 2:
            raise EmbeddingFormatError("embedding matrix must be 2-dimensional")
        if self.rows.shape[1] < 1:
            raise EmbeddingFormatError("embedding dimension must be positive")

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    @property
    def count(self) -> int:
        return int(self.rows.shape[0])


@dataclass(frozen=True)
class SegmentTable:
    """Per-attribute map from speaker id to category label."""

    attributes: dict[str, dict[str, str]]

    def attribute_names(self) -> list[str]:
        return list(self.attributes.keys())


@dataclass
class SplitPlan:
    """Per-speaker trial and enrollment utterance ids (disjoint sets)."""

    enrollment: dict[str, list[str]] = field(default_factory=dict)
    trial: dict[str, list[str]] = field(default_factory=dict)

    def speakers(self) -> list[str]:
        return sorted(self.enrollment.keys())

    def to_json_dict(self) -> dict:
        return {
            "speakers": {
                spk: {
                    "enrollment": sorted(self.enrollment[spk]),
                    "trial": sorted(self.trial[spk]),
                }
                for spk in self.speakers()
            }
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SplitPlan":
        plan = cls()
        for spk, sets in doc["speakers"].items():
            plan.enrollment[spk] = list(sets["enrollment"])
            plan.trial[spk] = list(sets["trial"])
        return plan


@dataclass(frozen=True)
class FixedPolicy:
    """Exactly n_enroll enrollment and n_trial trial utterances per speaker."""

    n_enroll: int
    n_trial: int


@dataclass(frozen=True)
class CappedPolicy:
    """Keep at most `total` utterances per speaker, n_enroll to enrollment,
    the rest to trial; speakers below total // 2 are split evenly instead."""

    total: int
    n_enroll: int


def parse_policy(text: str) -> FixedPolicy | CappedPolicy:
    """Parse 'fixed:20,20' or 'capped:60,20' into a policy object."""
    try:
        name, _, args = text.partition(":")
        a, b = (int(x) for x in args.split(","))
    except ValueError:
        raise PreconditionError(f"cannot parse split policy {text!r}") from None
    if name == "fixed":
        return FixedPolicy(n_enroll=a, n_trial=b)
    if name == "capped":
        return CappedPolicy(total=a, n_enroll=b)
    raise PreconditionError(f"unknown split policy {name!r}")


def _parse_record(obj: dict, line_no: int) -> UtteranceRecord:
    if not isinstance(obj, dict):
        raise ManifestError(f"line {line_no}: record is not a JSON object")
    for key in ("utterance_id", "speaker_id", "duration_seconds"):
        if key not in obj:
            raise ManifestError(f"line {line_no}: missing required key {key!r}")
    unknown = set(obj) - _MANIFEST_KEYS
    if unknown:
        raise ManifestError(f"line {line_no}: unknown keys {sorted(unknown)}")
    utt = obj["utterance_id"]
    spk = obj["speaker_id"]
    if not isinstance(utt, str) or not utt:
        raise ManifestError(f"line {line_no}: utterance_id must be a non-empty string")
    if not isinstance(spk, str) or not spk:
        raise ManifestError(f"line {line_no}: speaker_id must be a non-empty string")
    dur = obj["duration_seconds"]
    if not isinstance(dur, (int, float)) or isinstance(dur, bool) or not dur > 0:
        raise ManifestError(
            f"line {line_no}: duration_seconds must be > 0 for {utt!r}, got {dur!r}"
        )
    transcript = obj.get("transcript")
    if transcript is not None and not isinstance(transcript, str):
        raise ManifestError(f"line {line_no}: transcript must be a string for {utt!r}")
    alignment = None
    if obj.get("phones") is not None:
        alignment = []
        for i, pair in enumerate(obj["phones"]):
            ok = (
                isinstance(pair, (list, tuple))
                and len(pair) == 2
                and isinstance(pair[0], str)
                and isinstance(pair[1], (int, float))
                and not isinstance(pair[1], bool)
                and pair[1] > 0
            )
            if not ok:
                raise ManifestError(
                    f"line {line_no}: phones[{i}] must be [label, positive frames]"
                    f" for {utt!r}"
                )
            alignment.append((pair[0], pair[1]))
    row = obj.get("embedding_row")
    if row is not None and (not isinstance(row, int) or isinstance(row, bool) or row < 0):
        raise ManifestError(
            f"line {line_no}: embedding_row must be a nonnegative integer for {utt!r}"
        )
    return UtteranceRecord(
        utterance_id=utt,
        speaker_id=spk,
        duration_seconds=float(dur),
        transcript=transcript,
        phone_alignment=alignment,
        embedding_row=row,
    )


def iter_manifest_lines(path: str | Path) -> Iterable[tuple[int, UtteranceRecord]]:
    """Yield (line_no, record) pairs, raising ManifestError with the line
    number on the first malformed line. Blank lines are skipped."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {line_no}: malformed JSON ({exc.msg})") from None
            yield line_no, _parse_record(obj, line_no)


def load_manifest(path: str | Path) -> list[UtteranceRecord]:
    """Load and validate a JSON Lines manifest; duplicate ids are rejected."""
    records: list[UtteranceRecord] = []
    seen: dict[str, int] = {}
    for line_no, rec in iter_manifest_lines(path):
        if rec.utterance_id in seen:
            raise ManifestError(
                f"line {line_no}: duplicate utterance_id {rec.utterance_id!r}"
                f" (first seen on line {seen[rec.utterance_id]})"
            )
        seen[rec.utterance_id] = line_no
        records.append(rec)
    return records


def record_to_json_dict(rec: UtteranceRecord) -> dict:
    obj: dict = {
        "utterance_id": rec.utterance_id,
        "speaker_id": rec.speaker_id,
        "duration_seconds": rec.duration_seconds,
    }
    if rec.transcript is not None:
        obj["transcript"] = rec.transcript
    if rec.phone_alignment is not None:
        obj["phones"] = [[label, dur] for label, dur in rec.phone_alignment]
    if rec.embedding_row is not None:
        obj["embedding_row"] = rec.embedding_row
    return obj


def save_manifest(records: Iterable[UtteranceRecord], path: str | Path) -> None:
    """Serialize records as JSON Lines; load_manifest round-trips them."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json_dict(rec), sort_keys=True))
            fh.write("\n")


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Decode an EMB1 file; rejects bad magic, truncation, zero-norm rows."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise EmbeddingFormatError(f"{path}: file too short for an EMB1 header")
    if data[:4] != EMB1_MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {data[:4]!r}, expected {EMB1_MAGIC!r}")
    count, dim = struct.unpack_from("<II", data, 4)
    if dim < 1:
        raise EmbeddingFormatError(f"{path}: dimension must be positive, got {dim}")
    expected = 12 + count * dim * 4
    if len(data) < expected:
        raise EmbeddingFormatError(
            f"{path}: truncated payload ({len(data)} bytes, expected {expected})"
        )
    if len(data) > expected:
        raise EmbeddingFormatError(
            f"{path}: {len(data) - expected} trailing bytes after payload"
        )
    values = np.frombuffer(data, dtype="<f4", count=count * dim, offset=12)
    rows = values.reshape(count, dim).astype(np.float32, copy=True)
    norms = np.linalg.norm(rows.astype(np.float64), axis=1)
    bad = np.flatnonzero(~(norms > 0.0))
    if bad.size:
        raise EmbeddingFormatError(f"{path}: zero-norm embedding at row {int(bad[0])}")
    return EmbeddingMatrix(rows=rows)


def save_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write an EMB1 file; load_embeddings round-trips the float32 payload."""
    rows = np.ascontiguousarray(matrix.rows, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(EMB1_MAGIC)
        fh.write(struct.pack("<II", rows.shape[0], rows.shape[1]))
        fh.write(rows.tobytes())


def load_demographics(path: str | Path) -> SegmentTable:
    """Load a speaker-attribute CSV into a SegmentTable."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: demographics file is empty") from None
        if not header or header[0] != "speaker_id":
            raise ManifestError(f"{path}: demographics header must start with speaker_id")
        attr_names = header[1:]
        if len(set(attr_names)) != len(attr_names):
            raise ManifestError(f"{path}: duplicate attribute columns")
        attributes: dict[str, dict[str, str]] = {name: {} for name in attr_names}
        seen: set[str] = set()
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ManifestError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}"
                )
            spk = row[0]
            if spk in seen:
                raise ManifestError(f"{path}: duplicate speaker_id {spk!r} at row {row_no}")
            seen.add(spk)
            for name, value in zip(attr_names, row[1:]):
                if value != "":
                    attributes[name][spk] = value
    return SegmentTable(attributes=attributes)


def save_demographics(table: SegmentTable, path: str | Path) -> None:
    attr_names = table.attribute_names()
    speakers = sorted({spk for attr in table.attributes.values() for spk in attr})
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["speaker_id"] + attr_names) + "\n")
        for spk in speakers:
            cells = [table.attributes[name].get(spk, "") for name in attr_names]
            fh.write(",".join([spk] + cells) + "\n")


def filter_by_duration(
    manifest: list[UtteranceRecord], min_s: float, max_s: float
) -> list[UtteranceRecord]:
    """Keep records with min_s <= duration <= max_s, preserving order."""
    if not min_s < max_s:
        raise PreconditionError(f"duration bounds must satisfy min < max, got ({min_s}, {max_s})")
    return [r for r in manifest if min_s <= r.duration_seconds <= max_s]


def group_by_speaker(manifest: Iterable[UtteranceRecord]) -> dict[str, list[UtteranceRecord]]:
    groups: dict[str, list[UtteranceRecord]] = {}
    for rec in manifest:
        groups.setdefault(rec.speaker_id, []).append(rec)
    return groups


def index_by_id(manifest: Iterable[UtteranceRecord]) -> dict[str, UtteranceRecord]:
    return {rec.utterance_id: rec for rec in manifest}


def make_split(
    manifest: list[UtteranceRecord],
    policy: FixedPolicy | CappedPolicy,
    seed: int,
) -> SplitPlan:
    """Assign each speaker's utterances to enrollment and trial sets.

    Selection is uniform without replacement, deterministic for a given
    seed: speakers are visited in sorted order and each speaker's pool is
    permuted with a single PCG64 stream seeded once.

    FixedPolicy: exactly n_enroll + n_trial utterances are drawn; speakers
    with fewer are a hard error (silently dropping them would bias the
    attack statistic).

    CappedPolicy: up to `total` utterances are kept, n_enroll of them
    enrolled and the remainder used as trials. Speakers below total // 2
    utterances are instead split evenly, an odd leftover going to trial.
    """
    if not manifest:
        raise PreconditionError("manifest is empty")
    if isinstance(policy, FixedPolicy):
        if policy.n_enroll <= 0 or policy.n_trial <= 0:
            raise PreconditionError("fixed policy sizes must be positive")
    else:
        if policy.total <= 0 or policy.n_enroll <= 0:
            raise PreconditionError("capped policy sizes must be positive")
        if policy.n_enroll >= policy.total:
            raise PreconditionError("capped policy needs n_enroll < total")

    groups = group_by_speaker(manifest)
    rng = np.random.default_rng(seed)
    plan = SplitPlan()
    for spk in sorted(groups):
        ids = [rec.utterance_id for rec in groups[spk]]
        n = len(ids)
        if n < 2:
            raise SplitError(f"speaker {spk!r} has {n} utterance(s); need at least 2")
        perm = [ids[i] for i in rng.permutation(n)]
        if isinstance(policy, FixedPolicy):
            need = policy.n_enroll + policy.n_trial
            if n < need:
                raise SplitError(
                    f"speaker {spk!r} has {n} utterances; fixed policy needs {need}"
                )
            enroll = perm[: policy.n_enroll]
            trial = perm[policy.n_enroll : need]
        else:
            if n < policy.total // 2:
                # below half the cap: split evenly, extra utterance to trial
                enroll = perm[: n // 2]
                trial = perm[n // 2 :]
            else:
                kept = perm[: min(n, policy.total)]
                enroll = kept[: policy.n_enroll]
                trial = kept[policy.n_enroll :]
        if not enroll or not trial:
            raise SplitError(
                f"speaker {spk!r}: policy leaves an empty split ({len(enroll)} enrollment,"
                f" {len(trial)} trial)"
            )
        plan.enrollment[spk] = enroll
        plan.trial[spk] = trial
    return plan


def apply_split(manifest: list[UtteranceRecord], plan: SplitPlan) -> list[UtteranceRecord]:
    """Return a copy of the manifest with `split` set from the plan."""
    enrolled = {u for ids in plan.enrollment.values() for u in ids}
    trials = {u for ids in plan.trial.values() for u in ids}
    out = []
    for rec in manifest:
        if rec.utterance_id in enrolled:
            out.append(replace(rec, split="enrollment"))
        elif rec.utterance_id in trials:
            out.append(replace(rec, split="trial"))
        else:
            out.append(replace(rec, split="unassigned"))
    return out


def validate_corpus(
    manifest_path: str | Path,
    embeddings_path: str | Path | None = None,
    demographics_path: str | Path | None = None,
) -> list[str]:
    """Collect every invariant violation across the corpus files.

    Unlike the strict loaders, which raise on first error, this walks as
    far as it can and reports all findings (for the `validate` command).
    """
    findings: list[str] = []
    records: list[UtteranceRecord] = []
    seen: dict[str, int] = {}

    with open(manifest_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                findings.append(f"manifest line {line_no}: malformed JSON ({exc.msg})")
                continue
            try:
                rec = _parse_record(obj, line_no)
            except ManifestError as exc:
                findings.append(f"manifest {exc}")
                continue
            if rec.utterance_id in seen:
                findings.append(
                    f"manifest line {line_no}: duplicate utterance_id"
                    f" {rec.utterance_id!r} (first seen on line {seen[rec.utterance_id]})"
                )
                continue
            seen[rec.utterance_id] = line_no
            records.append(rec)

    embeddings = None
    if embeddings_path is not None:
        try:
            embeddings = load_embeddings(embeddings_path)
        except EmbeddingFormatError as exc:
            findings.append(str(exc))
    if embeddings is not None:
        used: dict[int, str] = {}
        for rec in records:
            if rec.embedding_row is None:
                findings.append(
                    f"utterance {rec.utterance_id!r} has no embedding_row while an"
                    " embeddings file is present"
                )
            elif rec.embedding_row >= embeddings.count:
                findings.append(
                    f"utterance {rec.utterance_id!r} references embedding_row"
                    f" {rec.embedding_row}, but the matrix has {embeddings.count} rows"
                )
            elif rec.embedding_row in used:
                findings.append(
                    f"utterance {rec.utterance_id!r} shares embedding_row"
                    f" {rec.embedding_row} with {used[rec.embedding_row]!r}"
                )
            else:
                used[rec.embedding_row] = rec.utterance_id

    if demographics_path is not None:
        try:
            table = load_demographics(demographics_path)
        except ManifestError as exc:
            findings.append(str(exc))
        else:
            known = {rec.speaker_id for rec in records}
            for attr, mapping in table.attributes.items():
                for spk in sorted(mapping):
                    if spk not in known:
                        findings.append(
                            f"demographics: speaker {spk!r} (attribute {attr!r}) does"
                            " not appear in the manifest"
                        )
    return findings
