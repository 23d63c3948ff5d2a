"""Binary weight container shared by the refiner and the feature extractor.

Layout:
    bytes 0..7    magic ``HRINPNT1``
    bytes 8..15   header length, uint64 little-endian
    header        UTF-8 JSON: {"format_version", "kind", "meta",
                  "tensors": [{"name", "shape", "offset", "nbytes"}, ...]}
    data          concatenated little-endian float32 tensor payloads,
                  offsets relative to the end of the header

Integer-valued state (e.g. batch-norm step counters) lives in the JSON
``meta`` so the tensor payload is uniformly float32 and round-trips
bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"HRINPNT1"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Raised for unreadable, truncated, or incompatible checkpoint files."""


def save_container(
    path: str | Path, kind: str, meta: dict, tensors: dict[str, np.ndarray]
) -> None:
    entries = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        entries.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": arr.nbytes}
        )
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "meta": meta,
        "tensors": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def load_container(path: str | Path) -> tuple[str, dict, dict[str, np.ndarray]]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a weight container (bad magic)")
    (header_len,) = struct.unpack_from("<Q", raw, len(MAGIC))
    header_end = len(MAGIC) + 8 + header_len
    if header_end > len(raw):
        raise CheckpointError(f"{path} is truncated (header)")
    try:
        header = json.loads(raw[len(MAGIC) + 8 : header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path} has a corrupt header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {header.get('format_version')} "
            f"!= supported {FORMAT_VERSION}"
        )
    data = raw[header_end:]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(data):
            raise CheckpointError(f"{path} is truncated (tensor {entry['name']!r})")
        arr = np.frombuffer(data[start : start + nbytes], dtype="<f4")
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return header["kind"], header["meta"], tensors
