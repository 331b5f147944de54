import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emb1kit import (
    DimensionError,
    EncodeError,
    ExportJob,
    JobFormatError,
    LabelError,
    UtteranceItem,
    export_alignments,
    export_embeddings,
    hash_encoder,
    inline_encoder,
)


def item(i, spk="spk0", **extra):
    return UtteranceItem(
        utterance_id=f"utt{i}",
        speaker_id=spk,
        duration_seconds=3.0,
        extra=extra or None,
    )


def read_emb1(path):
    """Independent decoder: header + float32 payload, straight off the bytes."""
    data = path.read_bytes()
    assert data[:4] == b"EMB1"
    count, dim = struct.unpack_from("<II", data, 4)
    assert len(data) == 12 + count * dim * 4
    return np.frombuffer(data, dtype="<f4", count=count * dim, offset=12).reshape(count, dim)


def read_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ------------------------------------------------------------- embeddings


def test_export_three_utterances(tmp_path):
    vecs = [[0.1, -2.5, 3.0], [1.0, 0.0, 0.5], [-0.25, 0.75, 9.0]]
    items = [item(i, spk=f"spk{i % 2}", embedding=v) for i, v in enumerate(vecs)]
    job = ExportJob(items=tuple(items), out_dir=tmp_path, encoder=inline_encoder)
    manifest_path, emb_path = export_embeddings(job)

    rows = read_emb1(emb_path)
    assert rows.shape == (3, 3)
    assert np.array_equal(rows, np.asarray(vecs, dtype=np.float32))

    lines = read_manifest(manifest_path)
    assert [ln["embedding_row"] for ln in lines] == [0, 1, 2]
    assert [ln["utterance_id"] for ln in lines] == ["utt0", "utt1", "utt2"]
    assert lines[1]["speaker_id"] == "spk1"


def test_export_empty_job(tmp_path):
    job = ExportJob(items=(), out_dir=tmp_path, encoder=inline_encoder, dim=7)
    manifest_path, emb_path = export_embeddings(job)
    data = emb_path.read_bytes()
    assert data == b"EMB1" + struct.pack("<II", 0, 7)
    assert manifest_path.read_text() == ""


def test_export_empty_job_without_declared_dim(tmp_path):
    _, emb_path = export_embeddings(ExportJob(items=(), out_dir=tmp_path, encoder=inline_encoder))
    assert struct.unpack_from("<II", emb_path.read_bytes(), 4) == (0, 1)


def test_dimension_drift_is_an_error(tmp_path):
    items = (item(0, embedding=[1.0, 2.0]), item(1, embedding=[1.0, 2.0, 3.0]))
    job = ExportJob(items=items, out_dir=tmp_path, encoder=inline_encoder)
    with pytest.raises(DimensionError, match="utt1"):
        export_embeddings(job)


def test_declared_dim_is_enforced(tmp_path):
    job = ExportJob(
        items=(item(0, embedding=[1.0, 2.0]),),
        out_dir=tmp_path,
        encoder=inline_encoder,
        dim=5,
    )
    with pytest.raises(DimensionError):
        export_embeddings(job)


def test_encoder_failure_names_the_utterance(tmp_path):
    def broken(it):
        raise OSError("cannot read audio")

    job = ExportJob(items=(item(0),), out_dir=tmp_path, encoder=broken)
    with pytest.raises(EncodeError, match="utt0"):
        export_embeddings(job)


def test_nonfinite_vector_rejected(tmp_path):
    job = ExportJob(
        items=(item(0, embedding=[1.0, float("nan")]),),
        out_dir=tmp_path,
        encoder=inline_encoder,
    )
    with pytest.raises(EncodeError, match="non-finite"):
        export_embeddings(job)


def test_all_zero_vector_rejected(tmp_path):
    job = ExportJob(
        items=(item(0, embedding=[0.0, 0.0]),),
        out_dir=tmp_path,
        encoder=inline_encoder,
    )
    with pytest.raises(EncodeError, match="zeros"):
        export_embeddings(job)


def test_missing_encoder(tmp_path):
    with pytest.raises(JobFormatError, match="encoder"):
        export_embeddings(ExportJob(items=(), out_dir=tmp_path))


def test_duplicate_ids_rejected_at_construction(tmp_path):
    with pytest.raises(JobFormatError, match="duplicate"):
        ExportJob(items=(item(0), item(0)), out_dir=tmp_path)


def test_bad_duration_rejected(tmp_path):
    bad = UtteranceItem(utterance_id="u", speaker_id="s", duration_seconds=0.0)
    with pytest.raises(JobFormatError, match="duration"):
        ExportJob(items=(bad,), out_dir=tmp_path)


@settings(max_examples=60)
@given(
    st.lists(
        st.lists(
            st.floats(allow_nan=False, allow_infinity=False, width=32),
            min_size=4,
            max_size=4,
        ).filter(lambda v: any(x != 0.0 for x in v)),
        min_size=1,
        max_size=12,
    )
)
def test_payload_round_trips_bit_exactly(tmp_path_factory, vectors):
    out = tmp_path_factory.mktemp("emb")
    items = tuple(item(i, embedding=v) for i, v in enumerate(vectors))
    _, emb_path = export_embeddings(ExportJob(items=items, out_dir=out, encoder=inline_encoder))
    rows = read_emb1(emb_path)
    expected = np.asarray(vectors, dtype=np.float32)
    assert rows.tobytes() == expected.tobytes()


def test_hash_encoder_is_deterministic():
    enc = hash_encoder(8)
    a = np.asarray(enc(item(0)))
    b = np.asarray(enc(item(0)))
    assert a.shape == (8,)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, np.asarray(enc(item(1))))


# ------------------------------------------------------------- alignments


def test_align_writes_phones(tmp_path):
    items = (
        item(0, phones=[["HH", 8], ["AH", 12], ["SIL", 30]]),
        item(1, phones=[["ah1", 5]]),  # stress digit + case normalized away
    )
    path = export_alignments(ExportJob(items=items, out_dir=tmp_path))
    lines = read_manifest(path)
    assert lines[0]["phones"] == [["HH", 8], ["AH", 12], ["SIL", 30]]
    assert lines[1]["phones"] == [["AH", 5]]
    assert "embedding_row" not in lines[0]


def test_align_unknown_label_names_it(tmp_path):
    items = (item(0, phones=[["QX", 4]]),)
    with pytest.raises(LabelError, match="QX"):
        export_alignments(ExportJob(items=items, out_dir=tmp_path))


def test_align_empty_job(tmp_path):
    path = export_alignments(ExportJob(items=(), out_dir=tmp_path))
    assert path.read_text() == ""


def test_align_missing_phones(tmp_path):
    with pytest.raises(JobFormatError, match="utt0"):
        export_alignments(ExportJob(items=(item(0),), out_dir=tmp_path))


def test_align_nonpositive_duration(tmp_path):
    items = (item(0, phones=[["AA", 0]]),)
    with pytest.raises(JobFormatError, match="duration"):
        export_alignments(ExportJob(items=items, out_dir=tmp_path))


def test_align_custom_aligner(tmp_path):
    def aligner(it):
        return [["SIL", 10], ["K", 3]]

    path = export_alignments(ExportJob(items=(item(0),), out_dir=tmp_path, aligner=aligner))
    assert read_manifest(path)[0]["phones"] == [["SIL", 10], ["K", 3]]
