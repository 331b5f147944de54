import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anonlens import corpus
from anonlens.errors import (
    EmbeddingFormatError,
    ManifestError,
    PreconditionError,
    SplitError,
)

from conftest import write_manifest


def rec(i, spk, dur=3.0, **kw):
    row = {"utterance_id": f"u{i}", "speaker_id": spk, "duration_seconds": dur}
    row.update(kw)
    return row


# ------------------------------------------------------------------ manifest

def test_load_manifest_roundtrip(tmp_path):
    records = [
        corpus.UtteranceRecord("u1", "s1", 2.5, transcript="hello world"),
        corpus.UtteranceRecord("u2", "s1", 4.0, phone_alignment=[("HH", 3.0), ("SIL", 1.0)]),
        corpus.UtteranceRecord("u3", "s2", 1.25, embedding_row=7),
    ]
    path = tmp_path / "m.jsonl"
    corpus.save_manifest(records, path)
    loaded = corpus.load_manifest(path)
    assert loaded == records


def test_load_manifest_empty_file(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text("")
    assert corpus.load_manifest(path) == []


def test_load_manifest_reports_bad_line_number(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text(json.dumps(rec(1, "s1")) + "\n{oops\n")
    with pytest.raises(ManifestError, match="line 2"):
        corpus.load_manifest(path)


def test_load_manifest_duplicate_id(tmp_path):
    path = write_manifest(tmp_path / "m.jsonl", [rec(1, "s1"), rec(1, "s2")])
    with pytest.raises(ManifestError, match="u1"):
        corpus.load_manifest(path)


@pytest.mark.parametrize(
    "bad",
    [
        {"speaker_id": "s", "duration_seconds": 1.0},  # no utterance_id
        rec(1, "s", dur=0.0),
        rec(1, "s", dur=-2.0),
        rec(1, "s", embedding_row=-1),
        rec(1, "s", embedding_row=1.5),
        rec(1, "s", phones=[["HH", 0]]),
        rec(1, "s", phones=[["HH"]]),
        rec(1, "s", transcript=42),
        rec(1, "s", extra_key=1),
        {"utterance_id": "", "speaker_id": "s", "duration_seconds": 1.0},
    ],
)
def test_load_manifest_rejects_malformed_records(tmp_path, bad):
    path = write_manifest(tmp_path / "m.jsonl", [bad])
    with pytest.raises(ManifestError, match="line 1"):
        corpus.load_manifest(path)


# ---------------------------------------------------------------- embeddings

def test_embeddings_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(5, 7)).astype(np.float32)
    path = tmp_path / "e.emb1"
    corpus.save_embeddings(corpus.EmbeddingMatrix(rows=rows), path)
    loaded = corpus.load_embeddings(path)
    assert loaded.rows.dtype == np.float32
    assert np.array_equal(loaded.rows, rows)


def test_embeddings_header_layout(tmp_path):
    rows = np.arange(6, dtype=np.float32).reshape(2, 3) + 1.0
    path = tmp_path / "e.emb1"
    corpus.save_embeddings(corpus.EmbeddingMatrix(rows=rows), path)
    blob = path.read_bytes()
    assert blob[:4] == b"EMB1"
    assert struct.unpack("<II", blob[4:12]) == (2, 3)
    assert len(blob) == 12 + 6 * 4


def test_embeddings_bad_magic(tmp_path):
    path = tmp_path / "e.emb1"
    path.write_bytes(b"XXXX" + struct.pack("<II", 1, 1) + struct.pack("<f", 1.0))
    with pytest.raises(EmbeddingFormatError, match="magic"):
        corpus.load_embeddings(path)


def test_embeddings_truncated(tmp_path):
    path = tmp_path / "e.emb1"
    path.write_bytes(b"EMB1" + struct.pack("<II", 2, 3) + b"\x00" * 8)
    with pytest.raises(EmbeddingFormatError, match="truncated"):
        corpus.load_embeddings(path)


def test_embeddings_trailing_bytes(tmp_path):
    path = tmp_path / "e.emb1"
    path.write_bytes(
        b"EMB1" + struct.pack("<II", 1, 1) + struct.pack("<f", 1.0) + b"\x00"
    )
    with pytest.raises(EmbeddingFormatError, match="trailing"):
        corpus.load_embeddings(path)


def test_embeddings_zero_norm_row_reports_index(tmp_path):
    rows = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]], dtype=np.float32)
    path = tmp_path / "e.emb1"
    with open(path, "wb") as fh:
        fh.write(b"EMB1" + struct.pack("<II", 3, 2) + rows.tobytes())
    with pytest.raises(EmbeddingFormatError, match="row 1"):
        corpus.load_embeddings(path)


def test_embeddings_count_zero_is_valid(tmp_path):
    path = tmp_path / "e.emb1"
    path.write_bytes(b"EMB1" + struct.pack("<II", 0, 4))
    loaded = corpus.load_embeddings(path)
    assert loaded.count == 0
    assert loaded.dim == 4


@given(
    st.integers(min_value=1, max_value=8),
    st.integers(min_value=1, max_value=12),
    st.integers(min_value=0, max_value=2**31),
)
@settings(max_examples=40, deadline=None)
def test_embeddings_roundtrip_property(tmp_path_factory, n, dim, seed):
    rng = np.random.default_rng(seed)
    rows = rng.normal(size=(n, dim)).astype(np.float32)
    rows[np.linalg.norm(rows, axis=1) == 0.0] = 1.0  # keep rows valid
    path = tmp_path_factory.mktemp("emb") / "e.emb1"
    corpus.save_embeddings(corpus.EmbeddingMatrix(rows=rows), path)
    assert np.array_equal(corpus.load_embeddings(path).rows, rows)


# -------------------------------------------------------------- demographics

def test_demographics_roundtrip(tmp_path):
    table = corpus.SegmentTable(
        attributes={
            "accent": {"s1": "scottish", "s2": "indian"},
            "age": {"s1": "30-39"},
        }
    )
    path = tmp_path / "demo.csv"
    corpus.save_demographics(table, path)
    loaded = corpus.load_demographics(path)
    assert loaded.attributes == table.attributes
    # s2 has no age cell -> absent, not empty-string
    assert "s2" not in loaded.attributes["age"]


def test_demographics_rejects_bad_header(tmp_path):
    path = tmp_path / "demo.csv"
    path.write_text("speaker,accent\ns1,us\n")
    with pytest.raises(ManifestError):
        corpus.load_demographics(path)


def test_demographics_rejects_duplicate_speaker(tmp_path):
    path = tmp_path / "demo.csv"
    path.write_text("speaker_id,accent\ns1,us\ns1,uk\n")
    with pytest.raises(ManifestError, match="duplicate"):
        corpus.load_demographics(path)


# ----------------------------------------------------------------- filtering

def test_filter_by_duration_bounds_inclusive():
    manifest = [
        corpus.UtteranceRecord("a", "s", 1.5),
        corpus.UtteranceRecord("b", "s", 2.0),
        corpus.UtteranceRecord("c", "s", 30.0),
        corpus.UtteranceRecord("d", "s", 31.0),
    ]
    kept = corpus.filter_by_duration(manifest, 2.0, 30.0)
    assert [r.utterance_id for r in kept] == ["b", "c"]


def test_filter_by_duration_identity_on_wide_bounds():
    manifest = [corpus.UtteranceRecord("a", "s", 1.5)]
    assert corpus.filter_by_duration(manifest, 0.0, float("inf")) == manifest


def test_filter_by_duration_requires_min_below_max():
    with pytest.raises(PreconditionError):
        corpus.filter_by_duration([], 5.0, 5.0)


@given(
    st.lists(st.floats(min_value=0.1, max_value=100), min_size=0, max_size=30),
    st.floats(min_value=0.1, max_value=50),
    st.floats(min_value=0.1, max_value=50),
)
def test_filter_by_duration_idempotent_under_widening(durs, a, width):
    b = a + width
    manifest = [corpus.UtteranceRecord(f"u{i}", "s", d) for i, d in enumerate(durs)]
    once = corpus.filter_by_duration(manifest, a, b)
    rewidened = corpus.filter_by_duration(once, a / 2, b * 2)
    assert rewidened == once


# ------------------------------------------------------------------ policies

def test_parse_policy():
    assert corpus.parse_policy("fixed:20,20") == corpus.FixedPolicy(20, 20)
    assert corpus.parse_policy("capped:60,20") == corpus.CappedPolicy(60, 20)


@pytest.mark.parametrize("bad", ["fixed", "fixed:20", "capped:a,b", "weird:1,2", ""])
def test_parse_policy_rejects_garbage(bad):
    with pytest.raises(PreconditionError):
        corpus.parse_policy(bad)


def make_speaker(n_utts, spk="spk"):
    return [corpus.UtteranceRecord(f"{spk}-{i}", spk, 3.0) for i in range(n_utts)]


def test_fixed_split_sizes():
    plan = corpus.make_split(make_speaker(40), corpus.FixedPolicy(20, 20), seed=0)
    assert len(plan.enrollment["spk"]) == 20
    assert len(plan.trial["spk"]) == 20
    assert not set(plan.enrollment["spk"]) & set(plan.trial["spk"])


def test_fixed_split_infeasible_is_error():
    with pytest.raises(SplitError, match="spk"):
        corpus.make_split(make_speaker(39), corpus.FixedPolicy(20, 20), seed=0)


def test_capped_split_above_cap():
    # 78 utterances, cap 60, 20 enrolled -> 40 trials
    plan = corpus.make_split(make_speaker(78), corpus.CappedPolicy(60, 20), seed=0)
    assert len(plan.enrollment["spk"]) == 20
    assert len(plan.trial["spk"]) == 40


def test_capped_split_small_speaker_even_with_extra_to_trial():
    plan = corpus.make_split(make_speaker(25), corpus.CappedPolicy(60, 20), seed=0)
    assert len(plan.enrollment["spk"]) == 12
    assert len(plan.trial["spk"]) == 13


def test_capped_split_exactly_at_cap():
    plan = corpus.make_split(make_speaker(60), corpus.CappedPolicy(60, 20), seed=0)
    assert len(plan.enrollment["spk"]) == 20
    assert len(plan.trial["spk"]) == 40


def test_split_rejects_speaker_with_one_utterance():
    with pytest.raises(SplitError):
        corpus.make_split(make_speaker(1), corpus.CappedPolicy(60, 20), seed=0)


def test_split_deterministic_and_seed_sensitive():
    manifest = make_speaker(50, "a") + make_speaker(50, "b")
    p1 = corpus.make_split(manifest, corpus.CappedPolicy(30, 10), seed=7)
    p2 = corpus.make_split(manifest, corpus.CappedPolicy(30, 10), seed=7)
    p3 = corpus.make_split(manifest, corpus.CappedPolicy(30, 10), seed=8)
    assert p1.to_json_dict() == p2.to_json_dict()
    assert p1.to_json_dict() != p3.to_json_dict()


@given(
    st.integers(min_value=2, max_value=90),
    st.integers(min_value=0, max_value=10**9),
)
@settings(max_examples=80, deadline=None)
def test_capped_split_law(n, seed):
    policy = corpus.CappedPolicy(60, 20)
    plan = corpus.make_split(make_speaker(n), policy, seed)
    enroll, trial = plan.enrollment["spk"], plan.trial["spk"]
    assert not set(enroll) & set(trial)
    assert set(enroll) | set(trial) <= {f"spk-{i}" for i in range(n)}
    if n < 30:
        assert len(enroll) == n // 2
        assert len(trial) == n - n // 2
    else:
        assert len(enroll) == 20
        assert len(trial) == min(n, 60) - 20


@given(st.integers(min_value=0, max_value=10**9))
@settings(max_examples=30, deadline=None)
def test_split_plan_json_roundtrip(seed):
    manifest = make_speaker(31, "a") + make_speaker(44, "b")
    plan = corpus.make_split(manifest, corpus.CappedPolicy(40, 15), seed)
    doc = json.loads(json.dumps(plan.to_json_dict()))
    again = corpus.SplitPlan.from_json_dict(doc)
    assert again.to_json_dict() == plan.to_json_dict()


def test_apply_split_marks_records():
    manifest = make_speaker(4)
    plan = corpus.SplitPlan(
        enrollment={"spk": ["spk-0"]}, trial={"spk": ["spk-1", "spk-2"]}
    )
    marked = corpus.apply_split(manifest, plan)
    assert [r.split for r in marked] == ["enrollment", "trial", "trial", "unassigned"]


# ---------------------------------------------------------------- validation

def test_validate_clean_corpus(tiny_corpus):
    manifest_path, emb_path = tiny_corpus
    assert corpus.validate_corpus(manifest_path, emb_path) == []


def test_validate_collects_multiple_findings(tmp_path):
    rows = [
        rec(1, "s1", embedding_row=0),
        rec(1, "s1", embedding_row=1),        # duplicate id
        rec(2, "s2", dur=-1.0),               # bad duration
        rec(3, "s2", embedding_row=99),       # row out of range
        rec(4, "s2", embedding_row=0),        # shares row 0 with u1
    ]
    manifest_path = write_manifest(tmp_path / "m.jsonl", rows)
    emb_path = tmp_path / "e.emb1"
    corpus.save_embeddings(
        corpus.EmbeddingMatrix(rows=np.eye(3, dtype=np.float32)), emb_path
    )
    demo_path = tmp_path / "demo.csv"
    demo_path.write_text("speaker_id,accent\ns1,us\nghost,uk\n")

    findings = corpus.validate_corpus(manifest_path, emb_path, demo_path)
    text = "\n".join(findings)
    assert len(findings) == 5
    assert "duplicate" in text
    assert "duration" in text
    assert "99" in text
    assert "shares embedding_row 0" in text
    assert "ghost" in text
