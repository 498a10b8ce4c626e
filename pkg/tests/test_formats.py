"""Versioned JSONL, CSV helpers, record converters, sample containers."""

import json

import numpy as np
import pytest

from mutualgaze.formats import (
    ANNOTATIONS_FORMAT,
    DETECTIONS_FORMAT,
    SampleReader,
    SampleWriter,
    TRACKS_FORMAT,
    annotation_to_record,
    detection_to_record,
    dump_record,
    read_jsonl,
    read_tensor_blob,
    record_to_annotation,
    record_to_detection,
    record_to_track,
    track_to_record,
    write_csv,
    write_jsonl,
    write_tensor_blob,
)
from mutualgaze.records import (
    BoundingBox,
    HeadDetection,
    HeadTrack,
    PairAnnotation,
    PairLabel,
)


class TestJsonl:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "d.jsonl"
        records = [{"a": 1, "b": 0.5}, {"a": 2, "b": 1.25}]
        write_jsonl(path, DETECTIONS_FORMAT, records)
        assert read_jsonl(path, DETECTIONS_FORMAT) == records

    def test_header_first_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, DETECTIONS_FORMAT, [])
        first = json.loads(path.read_text().splitlines()[0])
        assert first == {"format": DETECTIONS_FORMAT, "version": 1}

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, DETECTIONS_FORMAT, [])
        with pytest.raises(ValueError, match="expected format"):
            read_jsonl(path, TRACKS_FORMAT)

    def test_wrong_version_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"format":"laeo-detections","version":99}\n')
        with pytest.raises(ValueError, match="version"):
            read_jsonl(path, DETECTIONS_FORMAT)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("")
        with pytest.raises(ValueError, match="header"):
            read_jsonl(path, DETECTIONS_FORMAT)

    def test_unparseable_line_names_lineno(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, DETECTIONS_FORMAT, [{"a": 1}])
        path.write_text(path.read_text() + "{broken\n")
        with pytest.raises(ValueError, match=":3"):
            read_jsonl(path, DETECTIONS_FORMAT)

    def test_floats_rounded_to_six_decimals(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, DETECTIONS_FORMAT,
                    [{"x": 0.123456789, "nested": {"y": [1.000000049]}}])
        (rec,) = read_jsonl(path, DETECTIONS_FORMAT)
        assert rec["x"] == 0.123457
        assert rec["nested"]["y"][0] == 1.0

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        records = [{"z": 1.5, "a": 2.5}, {"k": "v"}]
        write_jsonl(a, DETECTIONS_FORMAT, records)
        write_jsonl(b, DETECTIONS_FORMAT, records)
        assert a.read_bytes() == b.read_bytes()

    def test_keys_sorted_for_stability(self):
        assert dump_record({"b": 1, "a": 2}) == '{"a":2,"b":1}'

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, DETECTIONS_FORMAT, [{"a": 1}])
        path.write_text(path.read_text() + "\n\n")
        assert read_jsonl(path, DETECTIONS_FORMAT) == [{"a": 1}]


class TestCsv:
    def test_float_formatting(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ("name", "value"), [("x", 0.5), ("y", 1.0 / 3.0)])
        lines = path.read_text().splitlines()
        assert lines[0] == "name,value"
        assert lines[1] == "x,0.500000"
        assert lines[2] == "y,0.333333"

    def test_non_floats_untouched(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ("a", "b"), [(3, "text")])
        assert path.read_text().splitlines()[1] == "3,text"

    def test_dict_rows_follow_header_order(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ("a", "b"), [{"b": 0.25, "a": "x"}])
        assert path.read_text().splitlines()[1] == "x,0.250000"


class TestRecordConverters:
    def test_detection_roundtrip(self):
        det = HeadDetection("v", 4, BoundingBox(1, 2, 3, 4), 0.75)
        assert record_to_detection(detection_to_record(det)) == det

    def test_detection_default_confidence(self):
        rec = {"video_id": "v", "frame": 0, "x1": 0, "y1": 0, "x2": 1,
               "y2": 1}
        assert record_to_detection(rec).confidence == 1.0

    def test_track_roundtrip(self):
        track = HeadTrack(3, "v", 7, (BoundingBox(0, 0, 2, 2),
                                      BoundingBox(1, 1, 3, 3)))
        assert record_to_track(track_to_record(track)) == track

    def test_annotation_roundtrip(self):
        ann = PairAnnotation("v", 2, BoundingBox(0, 0, 2, 2),
                             BoundingBox(4, 0, 6, 2), PairLabel.LAEO)
        back = record_to_annotation(annotation_to_record(ann))
        assert back == ann
        assert annotation_to_record(ann)["label"] == "laeo"


class TestTensorBlob:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "t.bin"
        arrs = [np.arange(6, dtype=np.float32).reshape(2, 3),
                np.zeros((), dtype=np.float32),
                np.ones((2, 1, 2), dtype=np.float32)]
        with open(path, "wb") as f:
            sizes = [write_tensor_blob(f, a) for a in arrs]
        with open(path, "rb") as f:
            for a, size in zip(arrs, sizes):
                back = read_tensor_blob(f)
                np.testing.assert_array_equal(back, a)
                assert back.dtype == np.float32

    def test_truncated_blob_rejected(self, tmp_path):
        path = tmp_path / "t.bin"
        with open(path, "wb") as f:
            write_tensor_blob(f, np.ones((4, 4), dtype=np.float32))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with open(path, "rb") as f:
            with pytest.raises(ValueError, match="truncated"):
                read_tensor_blob(f)

    def test_implausible_rank_rejected(self, tmp_path):
        path = tmp_path / "t.bin"
        path.write_bytes(b"\xff\xff\xff\xff")
        with open(path, "rb") as f:
            with pytest.raises(ValueError, match="rank"):
                read_tensor_blob(f)


class TestSampleContainer:
    def add_samples(self, directory, n=3):
        rng = np.random.default_rng(0)
        samples = []
        with SampleWriter(directory) as w:
            for i in range(n):
                tensors = {
                    "left": rng.random((2, 4, 4, 3), dtype=np.float32),
                    "maps": rng.random((1, 4, 4, 3), dtype=np.float32),
                }
                label = i % 2
                meta = {"video_id": f"v{i}", "frame": i * 10}
                w.add(tensors, label, meta)
                samples.append((tensors, label, meta))
        return samples

    def test_roundtrip(self, tmp_path):
        samples = self.add_samples(tmp_path / "c")
        with SampleReader(tmp_path / "c") as r:
            assert len(r) == 3
            np.testing.assert_array_equal(r.labels, [0, 1, 0])
            for i, (tensors, label, meta) in enumerate(samples):
                got_t, got_label, got_meta = r.load(i)
                assert got_label == label
                assert got_meta == meta
                for name in tensors:
                    np.testing.assert_array_equal(got_t[name],
                                                  tensors[name])

    def test_random_access_out_of_order(self, tmp_path):
        samples = self.add_samples(tmp_path / "c")
        with SampleReader(tmp_path / "c") as r:
            for i in (2, 0, 1, 0):
                got_t, _, _ = r.load(i)
                np.testing.assert_array_equal(got_t["left"],
                                              samples[i][0]["left"])

    def test_meta_without_load(self, tmp_path):
        self.add_samples(tmp_path / "c")
        with SampleReader(tmp_path / "c") as r:
            assert r.meta(1)["video_id"] == "v1"

    def test_missing_index_rejected(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            SampleReader(tmp_path / "nothing")
