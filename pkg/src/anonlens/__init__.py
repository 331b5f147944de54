"""Privacy evaluation for speaker anonymization systems.

Operates entirely on precomputed artifacts (embedding matrices, transcripts,
phone alignments, demographics tables): simulates the standard
enrollment-vs-trial embedding comparison attack, computes global,
per-speaker and per-segment equal error rates, and quantifies how much
speaker identity leaks through the linguistic content itself.
"""

__version__ = "0.1.0"
