"""Per-segment privacy: intra- and inter-EERs for demographic categories.

The intra-EER restricts both trial and model speakers to one segment,
answering how well members of the segment can hide among each other. The
inter-EER keeps the segment's speakers as trials but scores them against
every enrolled speaker, measuring the segment's overall identification
risk. Both coincide with the global EER when the segment is the whole
speaker set, and a singleton segment's inter-EER is exactly that
speaker's own EER.
"""

from __future__ import annotations

from dataclasses import dataclass

from .attack import EerResult, PairTable, compute_eer
from .corpus import SegmentTable
from .errors import PreconditionError

UNKNOWN_CATEGORY = "unknown"


@dataclass(frozen=True)
class SegmentRow:
    category: str
    n_speakers: int
    intra: EerResult
    inter: EerResult


@dataclass(frozen=True)
class SegmentReport:
    attribute: str
    min_speakers: int
    rows: tuple[SegmentRow, ...]
    excluded: tuple[tuple[str, int], ...]  # (category, n_speakers) below threshold


def intra_eer(pairs: PairTable, segment_speakers: set[str]) -> EerResult:
    """EER over pairs whose trial AND model speakers are in the segment."""
    sub = pairs.for_trial_speakers(segment_speakers).for_model_speakers(segment_speakers)
    if len(sub) == 0:
        raise PreconditionError("segment has no pairs in the table")
    scores = sub.score_set()
    if scores.targets.size == 0 or scores.nontargets.size == 0:
        raise PreconditionError(
            "segment too small: needs at least 2 speakers with trials and models"
        )
    return compute_eer(scores)


def inter_eer(pairs: PairTable, segment_speakers: set[str]) -> EerResult:
    """EER over the segment's trials scored against ALL speakers' models."""
    sub = pairs.for_trial_speakers(segment_speakers)
    if len(sub) == 0:
        raise PreconditionError("segment has no trials in the table")
    return compute_eer(sub.score_set())


def segment_speaker_map(
    pairs: PairTable, table: SegmentTable, attribute: str
) -> dict[str, set[str]]:
    """Group the table's trial speakers by category of `attribute`.

    Speakers without a value for the attribute form an explicit
    `unknown` category rather than being dropped.
    """
    if attribute not in table.attributes:
        raise PreconditionError(f"attribute {attribute!r} not in the demographics table")
    mapping = table.attributes[attribute]
    categories: dict[str, set[str]] = {}
    for spk in set(pairs.trial_speakers):
        category = mapping.get(spk, UNKNOWN_CATEGORY)
        categories.setdefault(category, set()).add(spk)
    return categories


def segment_report(
    pairs: PairTable,
    table: SegmentTable,
    attribute: str,
    min_speakers: int = 3,
) -> SegmentReport:
    """Intra- and inter-EER per category with at least `min_speakers`
    speakers; smaller categories are listed as excluded with their counts.
    """
    categories = segment_speaker_map(pairs, table, attribute)
    rows = []
    excluded = []
    for category in sorted(categories):
        speakers = categories[category]
        if len(speakers) < min_speakers:
            excluded.append((category, len(speakers)))
            continue
        rows.append(
            SegmentRow(
                category=category,
                n_speakers=len(speakers),
                intra=intra_eer(pairs, speakers),
                inter=inter_eer(pairs, speakers),
            )
        )
    return SegmentReport(
        attribute=attribute,
        min_speakers=min_speakers,
        rows=tuple(rows),
        excluded=tuple(excluded),
    )
