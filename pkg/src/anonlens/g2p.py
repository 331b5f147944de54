"""Dictionary-based grapheme-to-phoneme conversion.

Pronunciations come from a pronouncing dictionary in the classic CMU
plain-text format (word, whitespace, space-separated phones with optional
stress digits; alternative pronunciations suffixed `(n)`; `;;;` comments).
Stress digits are stripped on load, leaving the 39-label stress-free
alphabet; an extended variant appends `SIL` for alignments produced by
acoustic tooling, where silence is a first-class label.

Conversion is pure dictionary lookup: text is uppercased, punctuation is
dropped, and each in-vocabulary token expands to its first listed
pronunciation. Out-of-vocabulary tokens are skipped (and counted) or
raise, per policy.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import LexiconError, OovError, PreconditionError

# the stress-free pronouncing-dictionary phone set, in conventional order
BASE_PHONES: tuple[str, ...] = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH",
    "EH", "ER", "EY", "F", "G", "HH", "IH", "IY", "JH", "K",
    "L", "M", "N", "NG", "OW", "OY", "P", "R", "S", "SH",
    "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH",
)

SILENCE = "SIL"


def strip_stress(label: str) -> str:
    """Remove trailing stress digits from a raw phone label. Idempotent."""
    return label.rstrip("0123456789")


@dataclass(frozen=True)
class PhoneAlphabet:
    """Ordered phone labels with a bijective label -> index mapping."""

    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise PreconditionError("phone labels must be unique")
        object.__setattr__(
            self, "_index", {label: i for i, label in enumerate(self.labels)}
        )

    @classmethod
    def base(cls) -> "PhoneAlphabet":
        return cls(labels=BASE_PHONES)

    @classmethod
    def with_silence(cls) -> "PhoneAlphabet":
        return cls(labels=BASE_PHONES + (SILENCE,))

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise PreconditionError(f"phone label {label!r} not in alphabet") from None

    def label(self, index: int) -> str:
        return self.labels[index]


@dataclass(frozen=True)
class PhoneSequence:
    """Ordered phone indices, optionally with per-phone durations (frames)."""

    phones: tuple[int, ...]
    durations: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "phones", tuple(self.phones))
        if self.durations is not None:
            object.__setattr__(self, "durations", tuple(self.durations))
            if len(self.durations) != len(self.phones):
                raise PreconditionError(
                    f"{len(self.durations)} durations for {len(self.phones)} phones"
                )
            for i, d in enumerate(self.durations):
                if not d > 0:
                    raise PreconditionError(f"duration at position {i} must be > 0, got {d}")

    def __len__(self) -> int:
        return len(self.phones)


@dataclass(frozen=True)
class Lexicon:
    """Uppercase word -> list of stress-free pronunciations."""

    entries: dict[str, list[list[str]]]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def pronunciations(self, word: str) -> list[list[str]]:
        return self.entries.get(word, [])


_VARIANT_RE = re.compile(r"^(.*)\((\d+)\)$")


def load_lexicon(path: str | Path, alphabet: PhoneAlphabet) -> Lexicon:
    """Parse a CMU-format dictionary file, stripping stress digits.

    Variant entries like `READ(1)` are grouped under the base word, in
    file order. A stripped phone outside the alphabet is an error naming
    the label and line.
    """
    entries: dict[str, list[list[str]]] = {}
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith(";;;"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise LexiconError(f"{path}: line {line_no}: no pronunciation for {parts!r}")
            word = parts[0].upper()
            match = _VARIANT_RE.match(word)
            if match:
                word = match.group(1)
            phones = []
            for raw in parts[1:]:
                label = strip_stress(raw.upper())
                if label not in alphabet:
                    raise LexiconError(
                        f"{path}: line {line_no}: phone {label!r} (from {raw!r})"
                        " not in alphabet"
                    )
                phones.append(label)
            entries.setdefault(word, []).append(phones)
    return Lexicon(entries=entries)


def tokenize(text: str) -> list[str]:
    """Uppercase, drop punctuation, split on whitespace.

    Characters outside [A-Z0-9'] become spaces; apostrophes survive
    because the dictionary carries entries like IT'S, but purely
    decorative quotes at token edges are trimmed.
    """
    text = re.sub(r"[^A-Z0-9']+", " ", text.upper())
    return [tok for tok in (t.strip("'") for t in text.split()) if tok]


def transcript_to_phones(
    text: str,
    lexicon: Lexicon,
    alphabet: PhoneAlphabet,
    oov_policy: str = "skip",
) -> tuple[PhoneSequence, int]:
    """Convert a transcript to a duration-free PhoneSequence.

    Each in-vocabulary token expands to its first listed pronunciation.
    Returns the sequence and the number of tokens skipped as
    out-of-vocabulary (always 0 under oov_policy='error', which raises
    instead).
    """
    if oov_policy not in ("skip", "error"):
        raise PreconditionError(f"unknown OOV policy {oov_policy!r}")
    indices: list[int] = []
    skipped = 0
    for token in tokenize(text):
        prons = lexicon.pronunciations(token)
        if not prons:
            if oov_policy == "error":
                raise OovError(f"out-of-vocabulary token {token!r}")
            skipped += 1
            continue
        indices.extend(alphabet.index(label) for label in prons[0])
    return PhoneSequence(phones=tuple(indices)), skipped
