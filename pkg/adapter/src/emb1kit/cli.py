"""Command line: read a job file, write EMB1 + manifest artifacts.

Job file (JSON): {"utterances": [{...}, ...]}. Each utterance needs
utterance_id, speaker_id, duration_seconds; `source` is optional and any
other keys (e.g. "embedding", "phones") are passed through to the encoder
or aligner.

Exit codes mirror the toolkit's: 0 ok, 4 unreadable job file, 5 export
failed (encoder error, dimension drift, unknown phone label).
"""

from __future__ import annotations

import argparse
import importlib
import json
import sys
from pathlib import Path

from .errors import JobError, JobFormatError
from .jobs import ExportJob, UtteranceItem, export_alignments, export_embeddings, hash_encoder, inline_encoder

EXIT_OK = 0
EXIT_IO = 4
EXIT_FAILED = 5

_ITEM_FIELDS = ("utterance_id", "speaker_id", "duration_seconds", "source")


def load_job_items(path: Path) -> tuple[UtteranceItem, ...]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or not isinstance(doc.get("utterances"), list):
        raise JobFormatError(f"{path}: job file needs an 'utterances' list")
    items = []
    for entry in doc["utterances"]:
        if not isinstance(entry, dict):
            raise JobFormatError(f"{path}: every utterance must be a JSON object")
        for key in ("utterance_id", "speaker_id", "duration_seconds"):
            if key not in entry:
                raise JobFormatError(f"{path}: utterance missing {key!r}")
        extra = {k: v for k, v in entry.items() if k not in _ITEM_FIELDS}
        items.append(UtteranceItem(
            utterance_id=entry["utterance_id"],
            speaker_id=entry["speaker_id"],
            duration_seconds=entry["duration_seconds"],
            source=entry.get("source"),
            extra=extra or None,
        ))
    return tuple(items)


def resolve_callable(spec: str):
    """Import 'module.path:callable'."""
    if ":" not in spec:
        raise JobFormatError(f"bad callable spec {spec!r}; expected module.path:callable")
    mod_name, attr = spec.split(":", 1)
    try:
        fn = getattr(importlib.import_module(mod_name), attr)
    except (ImportError, AttributeError) as exc:
        raise JobFormatError(f"cannot load {spec!r}: {exc}") from exc
    if not callable(fn):
        raise JobFormatError(f"{spec!r} is not callable")
    return fn


def resolve_encoder(spec: str):
    """'inline', 'hash:DIM', or 'module.path:callable'."""
    if spec == "inline":
        return inline_encoder
    if spec.startswith("hash:"):
        try:
            return hash_encoder(int(spec.split(":", 1)[1]))
        except ValueError:
            raise JobFormatError(f"bad hash encoder spec {spec!r}; expected hash:DIM") from None
    return resolve_callable(spec)


def cmd_export(args) -> int:
    items = load_job_items(Path(args.job))
    job = ExportJob(
        items=items,
        out_dir=Path(args.out),
        encoder=resolve_encoder(args.encoder),
        dim=args.dim,
    )
    manifest_path, emb_path = export_embeddings(job)
    print(f"wrote {len(items)} embeddings to {emb_path}")
    print(f"wrote manifest to {manifest_path}")
    return EXIT_OK


def cmd_align(args) -> int:
    items = load_job_items(Path(args.job))
    aligner = resolve_callable(args.aligner) if args.aligner else None
    job = ExportJob(items=items, out_dir=Path(args.out), aligner=aligner)
    manifest_path = export_alignments(job)
    print(f"wrote {len(items)} alignments to {manifest_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emb1kit",
        description="Pack speaker embeddings and phone alignments into corpus files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="encode utterances into embeddings.emb1 + manifest.jsonl")
    p.add_argument("--job", required=True, help="job file (JSON)")
    p.add_argument("--encoder", default="inline",
                   help="inline | hash:DIM | module.path:callable")
    p.add_argument("--dim", type=int, default=None, help="declared embedding dimension")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("align", help="write a manifest with per-utterance phones fields")
    p.add_argument("--job", required=True, help="job file (JSON)")
    p.add_argument("--aligner", default=None,
                   help="module.path:callable; default reads 'phones' from the job file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_align)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (JobFormatError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO
    except JobError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAILED


def entrypoint() -> None:
    raise SystemExit(main())
