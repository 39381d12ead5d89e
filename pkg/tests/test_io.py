import json

import numpy as np
import pytest

from tepclass.datamodel import (
    ConfusionCounts,
    EpochSet,
    EvaluationReport,
    Label,
    Metrics,
    RawRecording,
    RunResult,
    SubjectFeatures,
)
from tepclass.errors import FormatError, ManifestError
from tepclass.io import (
    load_manifest,
    read_epochs,
    read_features_csv,
    read_recording,
    write_epochs,
    write_features_csv,
    write_manifest,
    write_recording,
    write_report,
)
from tepclass.datamodel import SubjectRecord


def test_recording_round_trip(tmp_path, small_recording):
    path = tmp_path / "r.tepr"
    write_recording(small_recording, path)
    back = read_recording(path)
    assert back.channels == small_recording.channels
    assert back.fs_hz == small_recording.fs_hz
    assert np.array_equal(back.pulse_samples, small_recording.pulse_samples)
    assert back.data.dtype == np.float32
    assert back.data.tobytes() == small_recording.data.tobytes()


def test_recording_header_layout(tmp_path, small_recording):
    path = tmp_path / "r.tepr"
    write_recording(small_recording, path)
    raw = path.read_bytes()
    assert raw[:4] == b"TEPR"
    assert int.from_bytes(raw[4:8], "little") == 1
    hdr_len = int.from_bytes(raw[8:12], "little")
    header = json.loads(raw[12 : 12 + hdr_len])
    assert header["pulse_samples"] == [2, 7]
    payload = np.frombuffer(raw[12 + hdr_len :], dtype="<f4")
    # channel-major
    assert np.array_equal(payload[:10], small_recording.data[0])


def test_bad_magic(tmp_path, small_recording):
    path = tmp_path / "r.tepr"
    write_recording(small_recording, path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="bad magic"):
        read_recording(path)


def test_payload_length_mismatch(tmp_path, small_recording):
    path = tmp_path / "r.tepr"
    write_recording(small_recording, path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(FormatError, match="payload"):
        read_recording(path)


def test_non_monotone_pulses_rejected(tmp_path, small_recording):
    path = tmp_path / "r.tepr"
    write_recording(small_recording, path)
    raw = path.read_bytes()
    hdr_len = int.from_bytes(raw[8:12], "little")
    header = json.loads(raw[12 : 12 + hdr_len])
    header["pulse_samples"] = [7, 2]
    hdr = json.dumps(header).encode()
    path.write_bytes(raw[:8] + len(hdr).to_bytes(4, "little") + hdr + raw[12 + hdr_len :])
    with pytest.raises(FormatError, match="increasing"):
        read_recording(path)


def test_120_pulse_block(tmp_path):
    pulses = np.arange(120) * 100 + 50
    rec = RawRecording(tuple(f"E{i}" for i in range(62)), 5000.0, np.zeros((62, 12100), np.float32), pulses)
    write_recording(rec, tmp_path / "b.tepr")
    assert len(read_recording(tmp_path / "b.tepr").pulse_samples) == 120


def test_epochs_round_trip_bytes(tmp_path, rng):
    from tepclass.montage import standard_channels

    data = rng.standard_normal((120, 62, 1500)).astype(np.float32)
    ep = EpochSet(standard_channels(), 1000.0, 500, data)
    write_epochs(ep, tmp_path / "a.tepe")
    back = read_epochs(tmp_path / "a.tepe")
    assert back.data.tobytes() == data.tobytes()
    assert (back.channels, back.fs_hz, back.t0_index) == (ep.channels, 1000.0, 500)
    write_epochs(back, tmp_path / "b.tepe")
    assert (tmp_path / "a.tepe").read_bytes() == (tmp_path / "b.tepe").read_bytes()


def test_epochs_t0_validation():
    with pytest.raises(FormatError, match="t0_index"):
        EpochSet(("Cz",), 1000.0, 5, np.zeros((1, 1, 5)))


def test_empty_epochset_round_trip(tmp_path):
    ep = EpochSet(("Cz", "Pz"), 1000.0, 2, np.zeros((0, 2, 6), np.float32))
    write_epochs(ep, tmp_path / "e.tepe")
    back = read_epochs(tmp_path / "e.tepe")
    assert back.data.shape == (0, 2, 6)


def _manifest(tmp_path, subjects, name="m.json"):
    doc = {"fs_hz": 5000, "channel_labels": ["Cz"], "subjects": subjects}
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_manifest_34_subjects(tmp_path):
    subs = [{"id": f"s{i:02d}", "label": "AD" if i < 17 else "HC", "path": f"s{i}.tepr"} for i in range(34)]
    m = load_manifest(_manifest(tmp_path, subs))
    assert len(m.subjects) == 34
    assert [s.id for s in m.subjects] == [s["id"] for s in subs]
    assert sum(s.label == Label.AD for s in m.subjects) == 17
    assert m.resolve(m.subjects[0]) == tmp_path / "s0.tepr"


def test_manifest_empty(tmp_path):
    with pytest.raises(ManifestError, match="empty manifest"):
        load_manifest(_manifest(tmp_path, []))


def test_manifest_duplicate_id(tmp_path):
    subs = [{"id": "s01", "label": "AD", "path": "a"}, {"id": "s01", "label": "HC", "path": "b"}]
    with pytest.raises(ManifestError, match="s01"):
        load_manifest(_manifest(tmp_path, subs))


def test_manifest_unknown_label(tmp_path):
    with pytest.raises(ManifestError, match="MCI"):
        load_manifest(_manifest(tmp_path, [{"id": "a", "label": "MCI", "path": "x"}]))


def test_manifest_parse_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ManifestError, match="parse error"):
        load_manifest(p)


def test_manifest_write_read(tmp_path):
    recs = [SubjectRecord("a", Label.AD, "a.tepr"), SubjectRecord("b", Label.HC, "b.tepr")]
    write_manifest(tmp_path / "m.json", 5000.0, ["Cz", "Pz"], recs)
    m = load_manifest(tmp_path / "m.json")
    assert m.subjects == recs and m.channel_labels == ["Cz", "Pz"]


def test_features_csv_round_trip(tmp_path, rng):
    feats = [SubjectFeatures(f"s{i}", Label(i % 2), rng.standard_normal(14)) for i in range(5)]
    write_features_csv(feats, tmp_path / "f.csv")
    back = read_features_csv(tmp_path / "f.csv")
    for a, b in zip(feats, back):
        assert a.id == b.id and a.label == b.label
        assert np.array_equal(a.values, b.values)
    header = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert header.startswith("id,label,max,min,mean,skew,kurtosis,activity")


def _report(n_runs):
    runs = []
    for r in range(n_runs):
        c = ConfusionCounts(10 + r % 3, 12, 5 - r % 3, 7)
        from tepclass.evaluate import compute_metrics

        runs.append(RunResult(r, 1000 + r, c, compute_metrics(c)))
    from tepclass.datamodel import METRIC_KEYS

    avg = {k: sum(getattr(x.metrics, k) for x in runs) / n_runs for k in METRIC_KEYS}
    return EvaluationReport(tuple(runs), avg, {"montage": "high"}, n_subjects=34)


def test_report_deterministic(tmp_path):
    for fmt in ("json", "csv"):
        write_report(_report(5), tmp_path / f"a.{fmt}", fmt)
        write_report(_report(5), tmp_path / f"b.{fmt}", fmt)
        assert (tmp_path / f"a.{fmt}").read_bytes() == (tmp_path / f"b.{fmt}").read_bytes()


def test_report_csv_rows(tmp_path):
    write_report(_report(100), tmp_path / "r.csv", "csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert len(lines) == 1 + 100 + 1
    header = lines[0].split(",")
    for col in ("accuracy", "sensitivity", "specificity", "f1"):
        assert col in header
    assert lines[-1].startswith("averaged,")


def test_report_json_schema(tmp_path):
    write_report(_report(3), tmp_path / "r.json")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["n_runs"] == 3 and len(doc["runs"]) == 3
    assert set(doc["averaged"]) == {"accuracy", "sensitivity", "specificity", "precision", "f1"}
    assert doc["config"] == {"montage": "high"}
    assert doc["software"]["name"] == "tepclass"


def test_report_invariant_counts():
    from tepclass.errors import EvaluationError

    c = ConfusionCounts(1, 1, 1, 1)
    m = Metrics(0.5, 0.5, 0.5, 0.5, 0.5)
    with pytest.raises(EvaluationError):
        EvaluationReport((RunResult(0, 0, c, m),), m.as_dict(), {}, n_subjects=5)
