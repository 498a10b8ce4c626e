"""File formats: versioned JSONL, CSV helpers, and the binary sample
container.

Every JSONL file starts with a header record ``{"format": <name>,
"version": 1}``; readers refuse files whose format name or version they
do not know, so stale files fail loudly instead of being misread.
Floats in text formats are rounded to 6 decimal digits, which makes
outputs diff-able and keeps reruns byte-identical.

The sample container is a directory holding ``index.jsonl`` (one record
per sample: label, metadata, byte offsets) and ``tensors.bin`` (each
tensor stored as a little-endian header of uint32 rank and dims followed
by raw float32 data).
"""

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .records import BoundingBox, HeadDetection, HeadTrack, PairAnnotation

FORMAT_VERSION = 1

DETECTIONS_FORMAT = "laeo-detections"
TRACKS_FORMAT = "laeo-tracks"
ANNOTATIONS_FORMAT = "laeo-annotations"
SCORES_FORMAT = "laeo-scores"
SHOTS_FORMAT = "laeo-shots"
CHARMAP_FORMAT = "laeo-charmap"
DATASET_INDEX_FORMAT = "laeo-dataset-index"


def _round_floats(value):
    if isinstance(value, float):
        return round(value, 6)
    if isinstance(value, dict):
        return {k: _round_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_floats(v) for v in value]
    return value


def dump_record(record) -> str:
    return json.dumps(_round_floats(record), separators=(",", ":"),
                      sort_keys=True)


def write_jsonl(path, format_name, records):
    """Write a versioned JSONL file; floats rounded to 6 decimals."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_record({"format": format_name,
                             "version": FORMAT_VERSION}) + "\n")
        for record in records:
            f.write(dump_record(record) + "\n")


def read_jsonl(path, format_name):
    """Read a versioned JSONL file, checking header format and version."""
    records = []
    header_seen = False
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: unparseable record "
                                 f"({e.msg})") from e
            if not header_seen:
                got = record.get("format")
                if got != format_name:
                    raise ValueError(
                        f"{path}: expected format {format_name!r}, "
                        f"got {got!r}"
                    )
                version = record.get("version")
                if version != FORMAT_VERSION:
                    raise ValueError(
                        f"{path}: unsupported version {version!r} "
                        f"(reader knows {FORMAT_VERSION})"
                    )
                header_seen = True
                continue
            records.append(record)
    if not header_seen:
        raise ValueError(f"{path}: missing format header")
    return records


def write_csv(path, header, rows):
    """CSV with floats fixed to 6 decimals for byte-stable output.

    Rows may be sequences in header order or mappings keyed by the
    header fields.
    """
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            values = [row[k] for k in header] if isinstance(row, dict) \
                else row
            writer.writerow(
                [f"{v:.6f}" if isinstance(v, float) else v for v in values]
            )


# -- record conversions ----------------------------------------------------

def detection_to_record(det: HeadDetection) -> dict:
    return {
        "video_id": det.video_id, "frame": det.frame,
        "x1": det.box.x1, "y1": det.box.y1,
        "x2": det.box.x2, "y2": det.box.y2,
        "conf": det.confidence,
    }


def record_to_detection(r) -> HeadDetection:
    return HeadDetection(
        r["video_id"], r["frame"],
        BoundingBox(r["x1"], r["y1"], r["x2"], r["y2"]),
        r.get("conf", 1.0),
    )


def track_to_record(track: HeadTrack) -> dict:
    return {
        "track_id": track.track_id, "video_id": track.video_id,
        "start_frame": track.start_frame,
        "boxes": [list(b.as_tuple()) for b in track.boxes],
    }


def record_to_track(r) -> HeadTrack:
    return HeadTrack(
        r["track_id"], r["video_id"], r["start_frame"],
        tuple(BoundingBox(*b) for b in r["boxes"]),
    )


def annotation_to_record(ann: PairAnnotation) -> dict:
    return {
        "video_id": ann.video_id, "frame": ann.frame,
        "box_a": list(ann.box_a.as_tuple()),
        "box_b": list(ann.box_b.as_tuple()),
        "label": ann.label.value,
    }


def record_to_annotation(r) -> PairAnnotation:
    from .records import PairLabel

    return PairAnnotation(
        r["video_id"], r["frame"],
        BoundingBox(*r["box_a"]), BoundingBox(*r["box_b"]),
        PairLabel(r["label"]),
    )


# -- binary tensor blobs -----------------------------------------------------

def write_tensor_blob(f, arr) -> int:
    """Append one self-describing float32 tensor; returns bytes written."""
    data = np.ascontiguousarray(arr, dtype="<f4")
    header = struct.pack("<I", data.ndim) + struct.pack(
        f"<{data.ndim}I", *data.shape
    )
    f.write(header)
    f.write(data.tobytes())
    return len(header) + data.nbytes


def read_tensor_blob(f) -> np.ndarray:
    (ndim,) = struct.unpack("<I", f.read(4))
    if ndim > 8:
        raise ValueError(f"implausible tensor rank {ndim}; corrupt file?")
    shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(f.read(4 * count), dtype="<f4")
    if data.size != count:
        raise ValueError("tensor blob truncated")
    return data.reshape(shape).copy()


class SampleWriter:
    """Writes a sample container directory (index.jsonl + tensors.bin)."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._bin = open(self.dir / "tensors.bin", "wb")
        self._index = open(self.dir / "index.jsonl", "w", encoding="utf-8")
        self._index.write(dump_record(
            {"format": DATASET_INDEX_FORMAT, "version": FORMAT_VERSION}
        ) + "\n")
        self._offset = 0
        self._count = 0

    def add(self, tensors, label, meta=None):
        """Append one sample: a name -> float32 array mapping plus label."""
        entry = {"id": self._count, "label": int(label),
                 "tensors": {}, "meta": meta or {}}
        for name, arr in tensors.items():
            start = self._offset
            self._offset += write_tensor_blob(self._bin, arr)
            entry["tensors"][name] = {"offset": start}
        self._index.write(dump_record(entry) + "\n")
        self._count += 1

    def close(self):
        self._bin.close()
        self._index.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SampleReader:
    """Random access over a sample container directory."""

    def __init__(self, directory):
        self.dir = Path(directory)
        index_path = self.dir / "index.jsonl"
        if not index_path.exists():
            raise FileNotFoundError(f"{index_path}: no sample index here")
        self.entries = read_jsonl(index_path, DATASET_INDEX_FORMAT)
        self._bin = open(self.dir / "tensors.bin", "rb")

    def __len__(self):
        return len(self.entries)

    @property
    def labels(self):
        return np.array([e["label"] for e in self.entries], dtype=np.int64)

    def meta(self, i):
        return self.entries[i]["meta"]

    def load(self, i):
        """Returns (tensors dict, label, meta) for sample i."""
        entry = self.entries[i]
        tensors = {}
        for name, ref in entry["tensors"].items():
            self._bin.seek(ref["offset"])
            tensors[name] = read_tensor_blob(self._bin)
        return tensors, entry["label"], entry["meta"]

    def close(self):
        self._bin.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
