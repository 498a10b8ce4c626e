"""Checkpoint files for model weights.

Layout, all little-endian:

    bytes 0..5    magic b"LAEO1\\n"
    bytes 6..13   uint64, byte length of the manifest
    manifest      UTF-8 JSON: format tag, version, tensor table
                  (name, shape, offset, nbytes per tensor, offsets
                  relative to the payload start) and a free-form
                  ``meta`` dict for configuration
    payload       raw float32 tensor data, C order, concatenated

Saving the result of a load writes the identical bytes, so checkpoints
can be round-tripped and diffed byte for byte.
"""

import json
import struct

import numpy as np

MAGIC = b"LAEO1\n"
FORMAT_NAME = "laeo-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(path, tensors, meta=None):
    """Write named float32 arrays (a name -> array mapping) plus metadata.

    Arrays are converted to little-endian float32; tensor order in the
    file follows the mapping's iteration order.
    """
    entries = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        blob = data.tobytes()
        entries.append({
            "name": name,
            "shape": list(data.shape),
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)

    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "tensors": entries,
        "meta": meta or {},
    }
    encoded = json.dumps(manifest, separators=(",", ":")).encode("utf-8")

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(encoded)))
        f.write(encoded)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    """Read a checkpoint; returns (tensors dict, meta dict).

    Tensors come back float32 with their saved shapes, in file order.
    """
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic)")
        (manifest_len,) = struct.unpack("<Q", f.read(8))
        manifest = json.loads(f.read(manifest_len).decode("utf-8"))
        if manifest.get("format") != FORMAT_NAME:
            raise ValueError(f"{path}: unexpected format tag "
                             f"{manifest.get('format')!r}")
        if manifest.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version "
                             f"{manifest.get('version')!r}")
        payload = f.read()

    tensors = {}
    for entry in manifest["tensors"]:
        start = entry["offset"]
        end = start + entry["nbytes"]
        if end > len(payload):
            raise ValueError(f"{path}: tensor {entry['name']!r} extends past "
                             "end of file")
        arr = np.frombuffer(payload[start:end], dtype="<f4")
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return tensors, manifest.get("meta", {})
