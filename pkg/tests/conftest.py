import json
from pathlib import Path

import numpy as np
import pytest

from anonlens import corpus

REPO_ROOT = Path(__file__).resolve().parents[1]
LEXICON_PATH = REPO_ROOT / "data" / "cmu_mini.dict"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per release criterion (tests in *acceptance* modules)."""
    outcomes: dict[str, str] = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            module = nodeid.split("::")[0].rsplit("/", 1)[-1]
            if "acceptance" not in module:
                continue
            name = nodeid.split("::")[-1]
            if status == "passed" and report.when != "call":
                continue
            # a failure in any phase beats an earlier "passed"
            if status != "passed" or name not in outcomes:
                outcomes[name] = status
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(outcomes):
        verdict = "PASS" if outcomes[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict} {name}")


@pytest.fixture
def lexicon_path() -> Path:
    return LEXICON_PATH


def write_manifest(path: Path, rows: list[dict]) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


@pytest.fixture
def tiny_corpus(tmp_path):
    """Two speakers x three utterances with near-orthogonal embeddings."""
    rows = np.array(
        [
            [1.0, 0.0, 0.02],
            [0.98, 0.05, 0.0],
            [1.0, -0.03, 0.01],
            [0.0, 1.0, 0.04],
            [0.02, 0.97, 0.0],
            [-0.01, 1.0, 0.03],
        ],
        dtype=np.float32,
    )
    manifest = []
    for i in range(6):
        spk = "alice" if i < 3 else "bob"
        manifest.append(
            {
                "utterance_id": f"utt{i}",
                "speaker_id": spk,
                "duration_seconds": 3.0 + i,
                "embedding_row": i,
            }
        )
    manifest_path = write_manifest(tmp_path / "manifest.jsonl", manifest)
    emb_path = tmp_path / "embeddings.emb1"
    corpus.save_embeddings(corpus.EmbeddingMatrix(rows=rows), emb_path)
    return manifest_path, emb_path
