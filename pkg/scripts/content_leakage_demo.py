#!/usr/bin/env python3
"""Show how distinctive word choice re-identifies a speaker on its own.

Six speakers, no voices at all: four read the same scripted prompts while
two improvise their own lines.  The "anonymized" embedding of each
utterance is just its phone-frequency vector plus a little noise — i.e. a
system that removed the voice perfectly but left the content.  The
embedding-comparison attack then recovers exactly the speakers whose
phone usage stands out, and the per-speaker EERs correlate negatively
with content distinctiveness.

Usage:
    python3 scripts/content_leakage_demo.py [--lexicon data/cmu_mini.dict] [--sigma 0.01]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from anonlens import attack, corpus, g2p, phonefeat

# the four scripted speakers all read these
PROMPTS = [
    "the water under the house",
    "read the book again",
    "one more year together",
    "say it again now",
    "a good day for work",
    "look at the world",
]

# two improvisers with their own material
SOLO_LINES = {
    "spk-joy": [
        "joy and oil and joy",
        "the boy saw the oil",
        "measure the vision",
        "joy joy joy",
        "vision of the boy",
        "oil on the water",
    ],
    "spk-three": [
        "those three think well",
        "think through each thing",
        "three three three",
        "this thing and that thing",
        "think and think again",
        "three people think",
    ],
}

SCRIPTED = ["spk-ann", "spk-bea", "spk-cal", "spk-dot"]


def build_corpus(lexicon_path, sigma, seed):
    alphabet = g2p.PhoneAlphabet.base()
    lexicon = g2p.load_lexicon(lexicon_path, alphabet)
    rng = np.random.default_rng(seed)

    texts = {spk: PROMPTS for spk in SCRIPTED}
    texts.update(SOLO_LINES)

    records = []
    vecs = []
    seqs_by_speaker = {}
    for spk in sorted(texts):
        seqs = []
        for i, line in enumerate(texts[spk]):
            seq, _ = g2p.transcript_to_phones(line, lexicon, alphabet, oov_policy="error")
            seqs.append(seq)
            # content-only "embedding": the utterance's own phone frequencies
            freq = phonefeat.phone_frequencies([seq], alphabet)
            vecs.append(freq + sigma * rng.standard_normal(len(alphabet)))
            records.append(corpus.UtteranceRecord(
                utterance_id=f"{spk}-u{i:02d}",
                speaker_id=spk,
                duration_seconds=3.0,
                transcript=line,
                embedding_row=len(vecs) - 1,
            ))
        seqs_by_speaker[spk] = seqs
    matrix = corpus.EmbeddingMatrix(rows=np.asarray(vecs, dtype=np.float32))
    return records, matrix, seqs_by_speaker, alphabet


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default_lex = Path(__file__).resolve().parent.parent / "data" / "cmu_mini.dict"
    ap.add_argument("--lexicon", default=str(default_lex))
    ap.add_argument("--sigma", type=float, default=0.01,
                    help="noise added to the content embeddings")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    records, matrix, seqs, alphabet = build_corpus(args.lexicon, args.sigma, args.seed)

    plan = corpus.make_split(records, corpus.parse_policy("fixed:3,3"), seed=args.seed)
    models = attack.build_enrollment_models(plan, records, matrix)
    pairs = attack.score_trials(plan, records, matrix, models)
    speaker_eers = attack.all_speaker_eers(pairs)

    freqs = {spk: phonefeat.phone_frequencies(s, alphabet) for spk, s in seqs.items()}
    dist = phonefeat.distinctiveness(freqs)

    print(f"{'speaker':>10}  {'distinctiveness':>15}  {'speaker EER':>11}")
    for spk in sorted(dist):
        print(f"{spk:>10}  {dist[spk]:>15.4f}  {speaker_eers[spk].eer:>11.4f}")

    order = sorted(dist)
    r = phonefeat.pearson([dist[s] for s in order], [speaker_eers[s].eer for s in order])
    glob = attack.compute_eer(pairs.score_set())
    print()
    print(f"global EER on content alone: {glob.eer:.4f}")
    print(f"pearson(distinctiveness, speaker EER) = {r:+.4f}")
    print()
    if r < -0.5:
        print("strong negative correlation: the more distinctive a speaker's")
        print("phone usage, the more reliably content alone re-identifies them.")
    else:
        print("correlation is weak here; raise --sigma to drown the content or")
        print("lower it to sharpen the effect.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
