"""Standalone MXPT codec for the checkpoint bridge.

The container byte layout is the contract between this tooling and the
pruning engine, so it is implemented here independently rather than imported:
magic "MXPT", u32 version 1, u64 header length, zero-padded JSON header
mapping names to {dtype, shape, offset, length}, then the raw little-endian
payload.  Offsets are payload-relative, 8-byte aligned, non-overlapping;
names are written in sorted order with compact JSON so output is canonical.
"""

import json
import struct

import numpy as np

MAGIC = b"MXPT"
VERSION = 1
_PREAMBLE = struct.Struct("<4sIQ")
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def _pad8(n):
    return (8 - n % 8) % 8


def write(tensors):
    """Serialize a name -> 2-D float32/float64 array mapping to MXPT bytes."""
    header = {}
    chunks = []
    offset = 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        if arr.ndim != 2:
            raise ValueError(f"tensor {name!r} must be 2-D, got shape {arr.shape}")
        tag = {np.dtype("float32"): "f32", np.dtype("float64"): "f64"}.get(arr.dtype)
        if tag is None:
            raise ValueError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes()
        header[name] = {
            "dtype": tag,
            "shape": [int(arr.shape[0]), int(arr.shape[1])],
            "offset": offset,
            "length": len(raw),
        }
        chunks.append(raw + b"\x00" * _pad8(len(raw)))
        offset += len(chunks[-1])
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    blob += b"\x00" * _pad8(len(blob))
    return _PREAMBLE.pack(MAGIC, VERSION, len(blob)) + blob + b"".join(chunks)


def read(data):
    """Parse MXPT bytes into a name -> array mapping, keeping stored dtypes."""
    if len(data) < _PREAMBLE.size or data[:4] != MAGIC:
        raise ValueError("not an MXPT container (bad magic)")
    _, version, header_len = _PREAMBLE.unpack_from(data)
    if version != VERSION:
        raise ValueError(f"unsupported container version {version}")
    payload = memoryview(data)[_PREAMBLE.size + header_len:]
    header = json.loads(bytes(data[_PREAMBLE.size:_PREAMBLE.size + header_len]).rstrip(b"\x00").decode())
    out = {}
    for name, entry in header.items():
        dtype = _DTYPES[entry["dtype"]]
        rows, cols = entry["shape"]
        if entry["offset"] + entry["length"] > len(payload):
            raise ValueError(f"tensor {name!r} runs past the payload")
        out[name] = (
            np.frombuffer(payload, dtype=dtype, count=rows * cols, offset=entry["offset"])
            .reshape(rows, cols)
            .copy()
        )
    return out


def write_file(path, tensors):
    with open(path, "wb") as fh:
        fh.write(write(tensors))


def read_file(path):
    with open(path, "rb") as fh:
        return read(fh.read())
