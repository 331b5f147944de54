"""Command-line front end.

Subcommands: validate, split, eer, phonestats, durfeat, segments, synth.
Every command is deterministic given its flags and --seed; rerunning a
command overwrites its outputs with identical bytes.

Exit codes: 0 success, 3 validation findings, 4 unreadable or malformed
input files, 5 violated computation preconditions (argparse keeps its
own code 2 for usage errors).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import attack, corpus, phonefeat, segments as segments_mod, synth
from .errors import DataFormatError, PreconditionError
from .g2p import PhoneAlphabet, load_lexicon, transcript_to_phones

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_PRECONDITION = 5


@dataclass
class RunConfig:
    manifest: Path | None = None
    embeddings: Path | None = None
    lexicon: Path | None = None
    demographics: Path | None = None
    out: Path | None = None
    seed: int = 0
    policy: str | None = None
    split: Path | None = None
    oov: str = "skip"
    mode: str = phonefeat.WEIGHTED
    min_speakers: int = 3
    min_duration: float | None = None
    max_duration: float | None = None
    phone_source: str = "transcript"
    speaker_eers: Path | None = None
    attributes: list[str] = field(default_factory=list)
    compare: Path | None = None
    n_speakers: int = 0
    dim: int = 0
    utts_per_speaker: int = 0
    noise_sigma: float = 0.0
    scheme: str = synth.ORTHOGONAL
    groups: str | None = None


def _ensure_out(cfg: RunConfig) -> Path:
    if cfg.out is None:
        raise PreconditionError("--out directory is required")
    cfg.out.mkdir(parents=True, exist_ok=True)
    return cfg.out


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _eer_dict(result: attack.EerResult) -> dict:
    return {
        "eer": result.eer,
        "threshold": result.threshold,
        "n_target": result.n_target,
        "n_nontarget": result.n_nontarget,
    }


def _load_filtered_manifest(cfg: RunConfig) -> list[corpus.UtteranceRecord]:
    if cfg.manifest is None:
        raise PreconditionError("--manifest is required")
    manifest = corpus.load_manifest(cfg.manifest)
    if cfg.min_duration is not None or cfg.max_duration is not None:
        lo = cfg.min_duration if cfg.min_duration is not None else 0.0
        hi = cfg.max_duration if cfg.max_duration is not None else float("inf")
        manifest = corpus.filter_by_duration(manifest, lo, hi)
    return manifest


def _resolve_plan(cfg: RunConfig, manifest: list[corpus.UtteranceRecord]) -> corpus.SplitPlan:
    if cfg.split is not None and cfg.policy is not None:
        raise PreconditionError("--split and --policy are mutually exclusive")
    if cfg.split is not None:
        with open(cfg.split, "r", encoding="utf-8") as fh:
            return corpus.SplitPlan.from_json_dict(json.load(fh))
    if cfg.policy is None:
        raise PreconditionError("either --split or --policy is required")
    return corpus.make_split(manifest, corpus.parse_policy(cfg.policy), cfg.seed)


def _run_attack(
    cfg: RunConfig,
    manifest: list[corpus.UtteranceRecord] | None = None,
    embeddings_path: Path | None = None,
) -> tuple[corpus.SplitPlan, attack.PairTable]:
    if manifest is None:
        manifest = _load_filtered_manifest(cfg)
    path = embeddings_path if embeddings_path is not None else cfg.embeddings
    if path is None:
        raise PreconditionError("--embeddings is required")
    embeddings = corpus.load_embeddings(path)
    plan = _resolve_plan(cfg, manifest)
    models = attack.build_enrollment_models(plan, manifest, embeddings)
    pairs = attack.score_trials(plan, manifest, embeddings, models)
    return plan, pairs


def cmd_validate(cfg: RunConfig) -> int:
    if cfg.manifest is None:
        raise PreconditionError("--manifest is required")
    findings = corpus.validate_corpus(cfg.manifest, cfg.embeddings, cfg.demographics)
    lines = [f"{len(findings)} errors"]
    lines += [f"  {f}" for f in findings]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if cfg.out is not None:
        out = _ensure_out(cfg)
        _write_text(out / "validation.txt", text)
        _write_json(out / "validation.json", {"n_errors": len(findings), "errors": findings})
    return EXIT_VALIDATION if findings else EXIT_OK


def cmd_split(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    manifest = _load_filtered_manifest(cfg)
    if cfg.policy is None:
        raise PreconditionError("--policy is required")
    plan = corpus.make_split(manifest, corpus.parse_policy(cfg.policy), cfg.seed)
    _write_json(out / "split.json", plan.to_json_dict())
    n_enroll = sum(len(v) for v in plan.enrollment.values())
    n_trial = sum(len(v) for v in plan.trial.values())
    sys.stdout.write(
        f"{len(plan.speakers())} speakers: {n_enroll} enrollment, {n_trial} trial\n"
    )
    return EXIT_OK


def _write_attack_outputs(out: Path, plan: corpus.SplitPlan, pairs: attack.PairTable) -> dict:
    global_eer = attack.compute_eer(pairs.score_set())
    per_speaker = attack.all_speaker_eers(pairs)

    _write_json(out / "split.json", plan.to_json_dict())
    _write_json(
        out / "eer.json",
        {
            "global": _eer_dict(global_eer),
            "n_speakers": len(plan.speakers()),
            "n_pairs": len(pairs),
        },
    )
    ordered = sorted(per_speaker.items(), key=lambda kv: (kv[1].eer, kv[0]))
    _write_csv(
        out / "speaker_eers.csv",
        ["speaker_id", "eer", "threshold", "n_target", "n_nontarget"],
        [[spk, r.eer, r.threshold, r.n_target, r.n_nontarget] for spk, r in ordered],
    )
    _write_csv(
        out / "scores.csv",
        ["trial_utterance_id", "model_speaker_id", "score", "is_target"],
        [
            [pairs.trial_ids[i], pairs.model_speakers[i], float(pairs.scores[i]),
             int(pairs.is_target[i])]
            for i in range(len(pairs))
        ],
    )

    lines = [
        f"global EER  : {global_eer.eer:.6f}",
        f"threshold   : {global_eer.threshold:.6f}",
        f"targets     : {global_eer.n_target}",
        f"nontargets  : {global_eer.n_nontarget}",
        f"speakers    : {len(plan.speakers())}",
        "",
        "per-speaker EERs (ascending)",
        f"{'speaker_id':<16} {'eer':>10} {'n_target':>9} {'n_nontarget':>12}",
    ]
    for spk, r in ordered:
        lines.append(f"{spk:<16} {r.eer:>10.6f} {r.n_target:>9} {r.n_nontarget:>12}")
    _write_text(out / "eer_report.txt", "\n".join(lines) + "\n")
    return {"global": global_eer, "per_speaker": per_speaker}


def cmd_eer(cfg: RunConfig) -> int:
    if cfg.compare is not None:
        return _cmd_eer_compare(cfg)
    out = _ensure_out(cfg)
    plan, pairs = _run_attack(cfg)
    results = _write_attack_outputs(out, plan, pairs)
    sys.stdout.write(f"global EER {results['global'].eer:.6f}\n")
    return EXIT_OK


def _cmd_eer_compare(cfg: RunConfig) -> int:
    """Grid mode: EER for several labeled corpora, original vs anonymized."""
    out = _ensure_out(cfg)
    base = cfg.compare.parent
    with open(cfg.compare, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "rows" not in doc or not doc["rows"]:
        raise PreconditionError(f"{cfg.compare}: compare config needs a nonempty 'rows' list")

    grid = []
    for row in doc["rows"]:
        label = row["label"]
        cells = {}
        for condition in ("original", "anonymized"):
            spec = row[condition]
            manifest = corpus.load_manifest(base / spec["manifest"])
            if cfg.min_duration is not None or cfg.max_duration is not None:
                lo = cfg.min_duration if cfg.min_duration is not None else 0.0
                hi = cfg.max_duration if cfg.max_duration is not None else float("inf")
                manifest = corpus.filter_by_duration(manifest, lo, hi)
            _, pairs = _run_attack(cfg, manifest, base / spec["embeddings"])
            cells[condition] = attack.compute_eer(pairs.score_set())
        grid.append((label, cells["original"], cells["anonymized"]))

    _write_csv(
        out / "comparison.csv",
        ["label", "original_eer", "anonymized_eer"],
        [[label, orig.eer, anon.eer] for label, orig, anon in grid],
    )
    _write_json(
        out / "comparison.json",
        {
            "rows": [
                {
                    "label": label,
                    "original": _eer_dict(orig),
                    "anonymized": _eer_dict(anon),
                }
                for label, orig, anon in grid
            ]
        },
    )
    width = max(len("label"), *(len(label) for label, _, _ in grid))
    lines = [f"{'label':<{width}} {'original':>10} {'anonymized':>11}"]
    for label, orig, anon in grid:
        lines.append(f"{label:<{width}} {orig.eer:>10.6f} {anon.eer:>11.6f}")
    _write_text(out / "comparison.txt", "\n".join(lines) + "\n")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def _phone_sequences_by_speaker(
    cfg: RunConfig, manifest: list[corpus.UtteranceRecord]
) -> tuple[dict[str, list], PhoneAlphabet, dict[str, int]]:
    """Collect each speaker's phone sequences from the configured source."""
    skipped: dict[str, int] = {}
    by_speaker: dict[str, list] = {}
    if cfg.phone_source == "transcript":
        if cfg.lexicon is None:
            raise PreconditionError("--lexicon is required for --phone-source transcript")
        alphabet = PhoneAlphabet.base()
        lexicon = load_lexicon(cfg.lexicon, alphabet)
        any_source = False
        for rec in manifest:
            if rec.transcript is None:
                continue
            any_source = True
            seq, n_skipped = transcript_to_phones(
                rec.transcript, lexicon, alphabet, oov_policy=cfg.oov
            )
            skipped[rec.speaker_id] = skipped.get(rec.speaker_id, 0) + n_skipped
            by_speaker.setdefault(rec.speaker_id, []).append(seq)
        if not any_source:
            raise PreconditionError("no phone source: manifest has no transcripts")
    elif cfg.phone_source == "alignment":
        # recognizer-side alignments carry explicit silence
        alphabet = PhoneAlphabet.with_silence()
        any_source = False
        for rec in manifest:
            if rec.phone_alignment is None:
                continue
            any_source = True
            seq = phonefeat.alignment_to_sequence(rec.phone_alignment, alphabet)
            by_speaker.setdefault(rec.speaker_id, []).append(seq)
        if not any_source:
            raise PreconditionError("no phone source: manifest has no phone alignments")
    else:
        raise PreconditionError(f"unknown phone source {cfg.phone_source!r}")
    return by_speaker, alphabet, skipped


def cmd_phonestats(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    manifest = _load_filtered_manifest(cfg)
    by_speaker, alphabet, skipped = _phone_sequences_by_speaker(cfg, manifest)

    vectors = {
        spk: phonefeat.phone_frequencies(seqs, alphabet)
        for spk, seqs in sorted(by_speaker.items())
    }
    _write_csv(
        out / "phone_frequencies.csv",
        ["speaker_id"] + list(alphabet.labels),
        [[spk] + [float(v) for v in vec] for spk, vec in sorted(vectors.items())],
    )

    summary: dict = {
        "phone_source": cfg.phone_source,
        "alphabet": list(alphabet.labels),
        "n_speakers": len(vectors),
        "oov_skipped_total": int(sum(skipped.values())),
        "oov_skipped_by_speaker": {k: v for k, v in sorted(skipped.items()) if v},
        "pearson_r": None,
    }

    distances = None
    if len(vectors) >= 2:
        distances = phonefeat.distinctiveness(vectors)
        _write_csv(
            out / "distinctiveness.csv",
            ["speaker_id", "avg_cosine_distance"],
            [[spk, d] for spk, d in sorted(distances.items())],
        )

    pearson_error: str | None = None
    if cfg.speaker_eers is not None:
        if distances is None:
            raise PreconditionError("correlation needs at least 2 speakers")
        eers = _read_speaker_eers(cfg.speaker_eers)
        common = sorted(set(distances) & set(eers))
        if len(common) < 2:
            raise PreconditionError(
                "correlation needs at least 2 speakers present in both the"
                " corpus and the EER table"
            )
        try:
            r = phonefeat.pearson(
                [distances[s] for s in common], [eers[s] for s in common]
            )
        except PreconditionError as exc:
            pearson_error = str(exc)
            summary["pearson_error"] = pearson_error
        else:
            summary["pearson_r"] = r
            summary["pearson_n"] = len(common)

    _write_json(out / "phonestats.json", summary)
    if pearson_error is not None:
        sys.stderr.write(f"error: {pearson_error}\n")
        return EXIT_PRECONDITION
    if summary["pearson_r"] is not None:
        sys.stdout.write(f"pearson r {summary['pearson_r']:.6f} over {summary['pearson_n']} speakers\n")
    else:
        sys.stdout.write(f"{len(vectors)} speakers\n")
    return EXIT_OK


def _read_speaker_eers(path: Path) -> dict[str, float]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "speaker_id" not in reader.fieldnames \
                or "eer" not in reader.fieldnames:
            raise DataFormatError(f"{path}: expected columns speaker_id and eer")
        return {row["speaker_id"]: float(row["eer"]) for row in reader}


def cmd_durfeat(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    manifest = _load_filtered_manifest(cfg)
    alphabet = PhoneAlphabet.with_silence()
    n = phonefeat.export_representations(
        manifest, alphabet, cfg.mode, out / "representations.jsonl"
    )
    sys.stdout.write(f"wrote {n} {cfg.mode} representations\n")
    return EXIT_OK


def cmd_segments(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    if cfg.demographics is None:
        raise PreconditionError("--demographics is required")
    table = corpus.load_demographics(cfg.demographics)
    _, pairs = _run_attack(cfg)

    attributes = cfg.attributes or table.attribute_names()
    reports = [
        segments_mod.segment_report(pairs, table, attr, cfg.min_speakers)
        for attr in attributes
    ]

    doc = {"min_speakers": cfg.min_speakers, "attributes": {}}
    text_lines = []
    for report in reports:
        _write_csv(
            out / f"segments_{report.attribute}.csv",
            ["attribute", "category", "n_speakers", "intra_eer", "inter_eer"],
            [
                [report.attribute, row.category, row.n_speakers, row.intra.eer, row.inter.eer]
                for row in report.rows
            ],
        )
        doc["attributes"][report.attribute] = {
            "rows": [
                {
                    "category": row.category,
                    "n_speakers": row.n_speakers,
                    "intra": _eer_dict(row.intra),
                    "inter": _eer_dict(row.inter),
                }
                for row in report.rows
            ],
            "excluded": [
                {"category": cat, "n_speakers": n} for cat, n in report.excluded
            ],
        }
        text_lines.append(f"attribute: {report.attribute}")
        text_lines.append(
            f"{'category':<20} {'n_speakers':>10} {'intra_eer':>10} {'inter_eer':>10}"
        )
        for row in report.rows:
            text_lines.append(
                f"{row.category:<20} {row.n_speakers:>10}"
                f" {row.intra.eer:>10.6f} {row.inter.eer:>10.6f}"
            )
        for cat, n in report.excluded:
            text_lines.append(
                f"{cat:<20} {n:>10}   excluded (fewer than {report.min_speakers} speakers)"
            )
        text_lines.append("")
    _write_json(out / "segments.json", doc)
    _write_text(out / "segments_report.txt", "\n".join(text_lines))
    sys.stdout.write("\n".join(text_lines))
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    if cfg.scheme == synth.ORTHOGONAL:
        group_of: dict[int, str] = {}
        scheme = synth.ORTHOGONAL
    else:
        if cfg.groups is None:
            raise PreconditionError("--groups is required for the grouped scheme")
        group_of = synth.parse_groups(cfg.groups, cfg.n_speakers)
        scheme = synth.SHARED_WITHIN_GROUPS
    spec = synth.SynthSpec(
        n_speakers=cfg.n_speakers,
        dim=cfg.dim,
        utterances_per_speaker=cfg.utts_per_speaker,
        noise_sigma=cfg.noise_sigma,
        seed=cfg.seed,
        mean_scheme=scheme,
        group_of=group_of,
    )
    manifest, embeddings, table = synth.generate(spec)
    corpus.save_manifest(manifest, out / "manifest.jsonl")
    corpus.save_embeddings(embeddings, out / "embeddings.emb1")
    if table is not None:
        corpus.save_demographics(table, out / "demographics.csv")
    sys.stdout.write(
        f"wrote {len(manifest)} utterances for {cfg.n_speakers} speakers"
        f" (dim {cfg.dim}, sigma {cfg.noise_sigma})\n"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anonlens",
        description="Privacy evaluation for speaker anonymization systems.",
        epilog="exit codes: 0 ok, 3 validation findings, 5 precondition"
        " violations, 4 unreadable inputs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, out_required=True):
        p.add_argument("--out", type=Path, required=out_required, help="output directory")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("validate", help="list corpus invariant violations")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--embeddings", type=Path)
    p.add_argument("--demographics", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("split", help="assign trial/enrollment utterances")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--policy", required=True, help="fixed:20,20 or capped:60,20")
    p.add_argument("--min-duration", type=float)
    p.add_argument("--max-duration", type=float)
    add_common(p)

    p = sub.add_parser("eer", help="run the attack and report EERs")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--embeddings", type=Path)
    p.add_argument("--policy", help="fixed:20,20 or capped:60,20")
    p.add_argument("--split", type=Path, help="reuse a split.json instead of --policy")
    p.add_argument("--min-duration", type=float)
    p.add_argument("--max-duration", type=float)
    p.add_argument("--compare", type=Path, help="JSON grid config: original vs anonymized corpora")
    add_common(p)

    p = sub.add_parser("phonestats", help="phone frequencies, distinctiveness, correlation")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--lexicon", type=Path)
    p.add_argument("--oov", choices=["skip", "error"], default="skip")
    p.add_argument("--phone-source", choices=["transcript", "alignment"], default="transcript")
    p.add_argument("--speaker-eers", type=Path, help="speaker_eers.csv from the eer command")
    p.add_argument("--min-duration", type=float)
    p.add_argument("--max-duration", type=float)
    add_common(p)

    p = sub.add_parser("durfeat", help="export duration-weighted phone representations")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--mode", choices=[phonefeat.WEIGHTED, phonefeat.INDICATOR],
                   default=phonefeat.WEIGHTED)
    p.add_argument("--min-duration", type=float)
    p.add_argument("--max-duration", type=float)
    add_common(p)

    p = sub.add_parser("segments", help="per-demographic-segment EER report")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--embeddings", type=Path, required=True)
    p.add_argument("--demographics", type=Path, required=True)
    p.add_argument("--policy", help="fixed:20,20 or capped:60,20")
    p.add_argument("--split", type=Path)
    p.add_argument("--attribute", action="append", dest="attributes", default=[])
    p.add_argument("--min-speakers", type=int, default=3)
    p.add_argument("--min-duration", type=float)
    p.add_argument("--max-duration", type=float)
    add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth corpus")
    p.add_argument("--n-speakers", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--utts-per-speaker", type=int, required=True)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--scheme", choices=[synth.ORTHOGONAL, "grouped"],
                   default=synth.ORTHOGONAL)
    p.add_argument("--groups", help="grouped scheme: 'name:count,name:count'")
    add_common(p)

    return parser


_COMMANDS = {
    "validate": cmd_validate,
    "split": cmd_split,
    "eer": cmd_eer,
    "phonestats": cmd_phonestats,
    "durfeat": cmd_durfeat,
    "segments": cmd_segments,
    "synth": cmd_synth,
}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    for name in vars(cfg):
        cli_name = name
        if hasattr(args, cli_name):
            value = getattr(args, cli_name)
            if value is not None or name in ("attributes",):
                setattr(cfg, name, value)
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = config_from_args(args)
    command = _COMMANDS[args.command]
    try:
        return command(cfg)
    except (DataFormatError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO
    except PreconditionError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PRECONDITION


def entrypoint() -> None:
    sys.exit(main())
