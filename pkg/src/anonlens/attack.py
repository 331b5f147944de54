"""Embedding-comparison attack: enrollment models, trial scoring, EER.

The attacker averages each speaker's enrollment embeddings into a centroid
and scores every trial utterance against every centroid with cosine
similarity (higher = more likely the same speaker). A pair is a target
when the trial speaker owns the model. The equal error rate summarizes
separability: 0.0 means every trial speaker was identified, 0.5 means the
scores carry no identity information.

EER convention (shared by compute_eer and the test-suite oracle):
candidate thresholds are the midpoints of adjacent sorted scores over the
pooled target+nontarget multiset; FRR(t) counts targets strictly below t,
FAR(t) counts nontargets at or above t; the reported EER is
(FAR + FRR) / 2 at the first candidate minimizing |FAR - FRR|, the
minimum being decided in exact integer arithmetic so that ties are broken
identically everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import EmbeddingMatrix, SplitPlan, UtteranceRecord, index_by_id
from .errors import PreconditionError


@dataclass(frozen=True)
class EnrollmentModel:
    speaker_id: str
    centroid: np.ndarray  # (dim,) float64, unnormalized mean


@dataclass(frozen=True)
class ScoreSet:
    targets: np.ndarray  # float64
    nontargets: np.ndarray  # float64


@dataclass(frozen=True)
class EerResult:
    eer: float
    threshold: float
    n_target: int
    n_nontarget: int


@dataclass(frozen=True)
class PairTable:
    """Full trial-vs-model score table, ordered by (trial id, model speaker).

    The canonical order makes downstream outputs byte-reproducible no
    matter how scoring was parallelized.
    """

    trial_ids: tuple[str, ...]
    trial_speakers: tuple[str, ...]
    model_speakers: tuple[str, ...]
    scores: np.ndarray  # float64
    is_target: np.ndarray  # bool

    def __len__(self) -> int:
        return len(self.trial_ids)

    def score_set(self) -> ScoreSet:
        return ScoreSet(
            targets=self.scores[self.is_target],
            nontargets=self.scores[~self.is_target],
        )

    def subset(self, mask: np.ndarray) -> "PairTable":
        idx = np.flatnonzero(mask)
        return PairTable(
            trial_ids=tuple(self.trial_ids[i] for i in idx),
            trial_speakers=tuple(self.trial_speakers[i] for i in idx),
            model_speakers=tuple(self.model_speakers[i] for i in idx),
            scores=self.scores[idx],
            is_target=self.is_target[idx],
        )

    def for_trial_speakers(self, speakers: set[str]) -> "PairTable":
        mask = np.fromiter(
            (spk in speakers for spk in self.trial_speakers), dtype=bool, count=len(self)
        )
        return self.subset(mask)

    def for_model_speakers(self, speakers: set[str]) -> "PairTable":
        mask = np.fromiter(
            (spk in speakers for spk in self.model_speakers), dtype=bool, count=len(self)
        )
        return self.subset(mask)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors; errors on zero norms."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if not (na > 0.0 and nb > 0.0):
        raise PreconditionError("cosine similarity undefined for zero-norm input")
    return float(np.dot(a, b) / (na * nb))


def build_enrollment_models(
    plan: SplitPlan,
    manifest: list[UtteranceRecord],
    embeddings: EmbeddingMatrix,
) -> list[EnrollmentModel]:
    """One model per speaker: the unweighted mean of enrollment vectors.

    Centroids are deliberately not renormalized: cosine scoring is
    scale-invariant, so renormalization could not change any score.
    """
    by_id = index_by_id(manifest)
    models = []
    for spk in plan.speakers():
        ids = plan.enrollment.get(spk, [])
        if not ids:
            raise PreconditionError(f"speaker {spk!r} has no enrollment utterances")
        rows = []
        for utt in ids:
            rec = by_id.get(utt)
            if rec is None:
                raise PreconditionError(f"enrollment utterance {utt!r} not in manifest")
            if rec.embedding_row is None:
                raise PreconditionError(f"enrollment utterance {utt!r} has no embedding_row")
            if rec.embedding_row >= embeddings.count:
                raise PreconditionError(
                    f"enrollment utterance {utt!r} references row {rec.embedding_row}"
                    f" beyond the {embeddings.count}-row matrix"
                )
            rows.append(rec.embedding_row)
        centroid = embeddings.rows[rows].astype(np.float64).mean(axis=0)
        if not np.linalg.norm(centroid) > 0.0:
            raise PreconditionError(f"speaker {spk!r} has a zero-norm enrollment centroid")
        models.append(EnrollmentModel(speaker_id=spk, centroid=centroid))
    return models


def score_trials(
    plan: SplitPlan,
    manifest: list[UtteranceRecord],
    embeddings: EmbeddingMatrix,
    models: list[EnrollmentModel],
) -> PairTable:
    """Score every (trial utterance, enrollment model) pair.

    Scores are cosine similarities; the table is assembled sorted by
    (trial utterance id, model speaker id).
    """
    if len(models) < 2:
        raise PreconditionError("need at least 2 enrollment models to form nontarget pairs")
    by_id = index_by_id(manifest)

    trials: list[tuple[str, str, int]] = []  # (utt_id, speaker, row)
    for spk in plan.speakers():
        for utt in plan.trial.get(spk, []):
            rec = by_id.get(utt)
            if rec is None:
                raise PreconditionError(f"trial utterance {utt!r} not in manifest")
            if rec.embedding_row is None:
                raise PreconditionError(f"trial utterance {utt!r} has no embedding_row")
            if rec.embedding_row >= embeddings.count:
                raise PreconditionError(
                    f"trial utterance {utt!r} references row {rec.embedding_row}"
                    f" beyond the {embeddings.count}-row matrix"
                )
            trials.append((utt, spk, rec.embedding_row))
    if not trials:
        raise PreconditionError("split plan holds no trial utterances")
    trials.sort(key=lambda t: t[0])

    models_sorted = sorted(models, key=lambda m: m.speaker_id)
    cent = np.stack([m.centroid for m in models_sorted]).astype(np.float64)
    if cent.shape[1] != embeddings.dim:
        raise PreconditionError(
            f"model dimension {cent.shape[1]} does not match embedding dim {embeddings.dim}"
        )
    cent_norm = cent / np.linalg.norm(cent, axis=1, keepdims=True)

    trial_rows = np.array([row for _, _, row in trials], dtype=np.intp)
    vecs = embeddings.rows[trial_rows].astype(np.float64)
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    if not np.all(norms > 0.0):
        raise PreconditionError("zero-norm trial embedding")
    sims = (vecs / norms) @ cent_norm.T  # (n_trials, n_models)

    n_models = len(models_sorted)
    trial_ids = []
    trial_speakers = []
    model_speakers = []
    is_target = np.empty(len(trials) * n_models, dtype=bool)
    k = 0
    for i, (utt, spk, _) in enumerate(trials):
        for m in models_sorted:
            trial_ids.append(utt)
            trial_speakers.append(spk)
            model_speakers.append(m.speaker_id)
            is_target[k] = m.speaker_id == spk
            k += 1
    return PairTable(
        trial_ids=tuple(trial_ids),
        trial_speakers=tuple(trial_speakers),
        model_speakers=tuple(model_speakers),
        scores=sims.reshape(-1).copy(),
        is_target=is_target,
    )


def compute_eer(scores: ScoreSet) -> EerResult:
    """Equal error rate of a labeled score set (see module docstring).

    Implementation: sort the pooled scores once, then read the counts at
    every candidate threshold from the sorted arrays. The reported value
    equals a brute-force sweep over the same candidates by construction.
    """
    targets = np.asarray(scores.targets, dtype=np.float64)
    nontargets = np.asarray(scores.nontargets, dtype=np.float64)
    n_t = targets.size
    n_nt = nontargets.size
    if n_t == 0 or n_nt == 0:
        raise PreconditionError("EER needs at least one target and one nontarget score")
    if not (np.all(np.isfinite(targets)) and np.all(np.isfinite(nontargets))):
        raise PreconditionError("scores must be finite")

    t_sorted = np.sort(targets)
    nt_sorted = np.sort(nontargets)
    pooled = np.sort(np.concatenate([t_sorted, nt_sorted]))
    candidates = (pooled[:-1] + pooled[1:]) / 2.0

    # counts at each candidate: m = #targets < t, k = #nontargets >= t
    m = np.searchsorted(t_sorted, candidates, side="left").astype(np.int64)
    k = n_nt - np.searchsorted(nt_sorted, candidates, side="left").astype(np.int64)

    # |FAR - FRR| compared exactly: FAR - FRR = (k*n_t - m*n_nt) / (n_t*n_nt)
    diff = np.abs(k * n_t - m * n_nt)
    best = int(np.argmin(diff))  # first occurrence on ties

    far = float(k[best] / n_nt)
    frr = float(m[best] / n_t)
    return EerResult(
        eer=(far + frr) / 2.0,
        threshold=float(candidates[best]),
        n_target=int(n_t),
        n_nontarget=int(n_nt),
    )


def speaker_eer(pairs: PairTable, speaker_id: str) -> EerResult:
    """EER over only the pairs whose trial speaker is `speaker_id`.

    Targets are that speaker's trials vs its own model, nontargets the
    same trials vs every other model; the operating point is the
    speaker's own, independent of other speakers.
    """
    if speaker_id not in set(pairs.trial_speakers):
        raise PreconditionError(f"speaker {speaker_id!r} has no trials in the pair table")
    sub = pairs.for_trial_speakers({speaker_id})
    return compute_eer(sub.score_set())


def all_speaker_eers(pairs: PairTable) -> dict[str, EerResult]:
    """Per-speaker EERs for every trial speaker in the table."""
    return {spk: speaker_eer(pairs, spk) for spk in sorted(set(pairs.trial_speakers))}
