"""Phone-level content features: frequencies, distinctiveness, durations.

Per-speaker relative phone frequencies summarize what a speaker says; the
average pairwise cosine distance of those frequency vectors measures how
distinctive each speaker's content is, and its correlation with the
per-speaker attack EERs quantifies content leakage. The duration
representation turns an aligned phone sequence into a one-hot-style
matrix whose single nonzero per column is the phone's duration (or 1 in
the duration-free indicator variant), for consumption by external
recognizer trainers.

All functions here are pure; parallelizing over speakers or utterances
cannot change any output.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import UtteranceRecord
from .errors import DataFormatError, PreconditionError
from .g2p import PhoneAlphabet, PhoneSequence

WEIGHTED = "weighted"
INDICATOR = "indicator"


def phone_frequencies(
    sequences: Iterable[PhoneSequence], alphabet: PhoneAlphabet
) -> np.ndarray:
    """Relative phone frequencies pooled over one speaker's sequences.

    Counts every occurrence (durations are ignored) and divides by the
    speaker's total phone count, so the result sums to 1.
    """
    counts = np.zeros(len(alphabet), dtype=np.float64)
    for seq in sequences:
        for p in seq.phones:
            if not 0 <= p < len(alphabet):
                raise PreconditionError(f"phone index {p} outside alphabet of size {len(alphabet)}")
            counts[p] += 1.0
    total = counts.sum()
    if total == 0:
        raise PreconditionError("speaker has zero phones; cannot compute frequencies")
    return counts / total


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cosine similarity; in [0, 1] for nonnegative inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if not (na > 0.0 and nb > 0.0):
        raise PreconditionError("cosine distance undefined for zero-norm input")
    if np.array_equal(a, b):
        # exact zero on self, where dot/norm rounding would leave ~1e-16
        return 0.0
    d = 1.0 - float(np.dot(a, b) / (na * nb))
    # rounding in the dot product can push the distance a hair below zero
    return max(0.0, d)


def distinctiveness(vectors: dict[str, np.ndarray]) -> dict[str, float]:
    """Mean cosine distance from each speaker to all other speakers.

    Each unordered pair contributes once from each endpoint's
    perspective, i.e. a speaker's value averages its N-1 pair distances.
    """
    speakers = sorted(vectors)
    n = len(speakers)
    if n < 2:
        raise PreconditionError("distinctiveness needs at least 2 speakers")
    dist = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            d = cosine_distance(vectors[speakers[i]], vectors[speakers[j]])
            dist[i, j] = dist[j, i] = d
    return {spk: float(dist[i].sum() / (n - 1)) for i, spk in enumerate(speakers)}


def pearson(x: Iterable[float], y: Iterable[float]) -> float:
    """Pearson product-moment correlation; errors on zero variance."""
    xv = np.asarray(list(x), dtype=np.float64)
    yv = np.asarray(list(y), dtype=np.float64)
    if xv.size != yv.size:
        raise PreconditionError(f"length mismatch: {xv.size} vs {yv.size}")
    if xv.size < 2:
        raise PreconditionError("correlation needs at least 2 points")
    xm = xv - xv.mean()
    ym = yv - yv.mean()
    sx = float(np.dot(xm, xm))
    sy = float(np.dot(ym, ym))
    if sx == 0.0 or sy == 0.0:
        raise PreconditionError("correlation undefined: an argument has zero variance")
    r = float(np.dot(xm, ym) / math.sqrt(sx * sy))
    return max(-1.0, min(1.0, r))


def duration_matrix(
    seq: PhoneSequence, alphabet: PhoneAlphabet, mode: str = WEIGHTED
) -> np.ndarray:
    """One-hot-style representation: column t carries the phone's duration
    (weighted mode) or 1 (indicator mode) at the row of phone t.
    """
    if mode not in (WEIGHTED, INDICATOR):
        raise PreconditionError(f"unknown mode {mode!r}")
    if mode == WEIGHTED and seq.durations is None:
        raise PreconditionError("weighted mode requires durations")
    n = len(alphabet)
    t = len(seq)
    matrix = np.zeros((n, t), dtype=np.float64)
    for col, p in enumerate(seq.phones):
        if not 0 <= p < n:
            raise PreconditionError(f"phone index {p} outside alphabet of size {n}")
        matrix[p, col] = seq.durations[col] if mode == WEIGHTED else 1.0
    return matrix


def alignment_to_sequence(
    alignment: list[tuple[str, float]], alphabet: PhoneAlphabet
) -> PhoneSequence:
    """Map a (label, duration_frames) alignment onto alphabet indices."""
    phones = tuple(alphabet.index(label) for label, _ in alignment)
    durations = tuple(float(d) for _, d in alignment)
    return PhoneSequence(phones=phones, durations=durations)


def export_representations(
    manifest: list[UtteranceRecord],
    alphabet: PhoneAlphabet,
    mode: str,
    path: str | Path,
) -> int:
    """Write one sparse representation record per utterance as JSON Lines.

    Each record holds `utterance_id`, `mode`, `phones` (alphabet indices,
    column order) and `values` (the per-column nonzero magnitudes).
    Returns the number of records written. Every utterance must carry a
    phone alignment.
    """
    if mode not in (WEIGHTED, INDICATOR):
        raise PreconditionError(f"unknown mode {mode!r}")
    written = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in manifest:
            if rec.phone_alignment is None:
                raise PreconditionError(
                    f"utterance {rec.utterance_id!r} has no phone alignment"
                )
            seq = alignment_to_sequence(rec.phone_alignment, alphabet)
            if mode == WEIGHTED:
                values = [float(d) for d in seq.durations]
            else:
                values = [1.0] * len(seq)
            obj = {
                "utterance_id": rec.utterance_id,
                "mode": mode,
                "phones": list(seq.phones),
                "values": values,
            }
            fh.write(json.dumps(obj, sort_keys=True))
            fh.write("\n")
            written += 1
    return written


def load_representations(path: str | Path) -> list[dict]:
    """Read an export back; exact inverse of export_representations."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: line {line_no}: malformed JSON ({exc.msg})")
            for key in ("utterance_id", "mode", "phones", "values"):
                if key not in obj:
                    raise DataFormatError(f"{path}: line {line_no}: missing key {key!r}")
            if len(obj["phones"]) != len(obj["values"]):
                raise DataFormatError(
                    f"{path}: line {line_no}: phones/values length mismatch"
                )
            out.append(obj)
    return out


def representation_to_matrix(record: dict, alphabet: PhoneAlphabet) -> np.ndarray:
    """Densify a loaded sparse representation record."""
    n = len(alphabet)
    phones = record["phones"]
    values = record["values"]
    matrix = np.zeros((n, len(phones)), dtype=np.float64)
    for col, (p, v) in enumerate(zip(phones, values)):
        if not 0 <= p < n:
            raise DataFormatError(f"phone index {p} outside alphabet of size {n}")
        matrix[p, col] = v
    return matrix
