"""Bit-exact single-file tensor container (MXPT) and manifest validation.

Byte layout, little-endian throughout::

    magic "MXPT" (4 bytes)
    format version, u32 (currently 1)
    header length, u64 (JSON bytes plus zero padding to an 8-byte multiple)
    header, UTF-8 JSON, zero-padded
    payload, raw tensor bytes

The header maps each tensor name to ``{"dtype", "shape", "offset", "length"}``
with offsets relative to the payload start, 8-byte aligned and non-overlapping.
Writing is canonical: names are stored in lexicographic order and the JSON has
sorted keys and no whitespace, so the same tensor set always serializes to the
same bytes.  ``f32`` payloads are widened to float64 matrices on read.

The manifest is a separate JSON document, not embedded, so one container can
serve multiple pipelines::

    {"layers": [{"name": ..., "weight": ..., "bias": ..., "calib": ...}, ...]}
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import CorruptionError, FormatError, ShapeError, ValidationError, VersionError
from .tensor_core import as_matrix

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "LayerSpec",
    "ResolvedLayer",
    "write_container",
    "read_container",
    "write_container_file",
    "read_container_file",
    "load_manifest",
    "validate_manifest",
]

MAGIC = b"MXPT"
FORMAT_VERSION = 1

_PREAMBLE = struct.Struct("<4sIQ")  # magic, version, header length
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def _pad8(n: int) -> int:
    return (8 - n % 8) % 8


def _normalize_tensors(tensors) -> list[tuple[str, np.ndarray]]:
    if isinstance(tensors, Mapping):
        items: Iterable[tuple[str, np.ndarray]] = tensors.items()
    else:
        items = tensors
    seen: dict[str, np.ndarray] = {}
    for name, arr in items:
        if not isinstance(name, str) or not name:
            raise FormatError("tensor names must be non-empty strings")
        if name in seen:
            raise FormatError(f"duplicate tensor name: {name!r}")
        seen[name] = arr
    return sorted(seen.items())


def write_container(tensors) -> bytes:
    """Serialize named tensors to MXPT bytes.

    Accepts a mapping or an iterable of (name, array) pairs.  float64 arrays
    are stored as ``f64`` and float32 arrays as ``f32``; other dtypes are
    rejected rather than silently cast.
    """
    header: dict[str, dict] = {}
    chunks: list[bytes] = []
    offset = 0
    for name, arr in _normalize_tensors(tensors):
        arr = np.asarray(arr)
        if arr.dtype == np.float32:
            tag = "f32"
        elif arr.dtype == np.float64:
            tag = "f64"
        else:
            raise FormatError(f"tensor {name!r}: unsupported dtype {arr.dtype}")
        if arr.ndim != 2:
            raise ShapeError(f"tensor {name!r}: expected a 2-D matrix, got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"tensor {name!r}: entries must be finite")
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes()
        header[name] = {
            "dtype": tag,
            "shape": [int(arr.shape[0]), int(arr.shape[1])],
            "offset": offset,
            "length": len(raw),
        }
        pad = _pad8(len(raw))
        chunks.append(raw + b"\x00" * pad)
        offset += len(raw) + pad

    header_json = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    header_json += b"\x00" * _pad8(len(header_json))
    return _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header_json)) + header_json + b"".join(chunks)


def read_container(data: bytes) -> dict[str, np.ndarray]:
    """Parse MXPT bytes back into named float64 matrices (inverse of write)."""
    if len(data) < _PREAMBLE.size or data[:4] != MAGIC:
        raise FormatError("not an MXPT container (bad magic)")
    magic, version, header_len = _PREAMBLE.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported container version {version}")
    payload_start = _PREAMBLE.size + header_len
    if payload_start > len(data):
        raise CorruptionError("container truncated inside header")
    try:
        header = json.loads(data[_PREAMBLE.size:payload_start].rstrip(b"\x00").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptionError(f"container header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise CorruptionError("container header must be a JSON object")

    payload = memoryview(data)[payload_start:]
    spans: list[tuple[int, int, str]] = []
    tensors: dict[str, np.ndarray] = {}
    for name, entry in header.items():
        try:
            tag = entry["dtype"]
            shape = entry["shape"]
            offset = entry["offset"]
            length = entry["length"]
        except (TypeError, KeyError) as exc:
            raise CorruptionError(f"tensor {name!r}: malformed header entry") from exc
        if tag not in _DTYPES:
            raise CorruptionError(f"tensor {name!r}: unknown dtype {tag!r}")
        if (
            not isinstance(shape, list)
            or len(shape) != 2
            or not all(isinstance(s, int) and s >= 0 for s in shape)
        ):
            raise CorruptionError(f"tensor {name!r}: malformed shape {shape!r}")
        dtype = _DTYPES[tag]
        if not isinstance(offset, int) or not isinstance(length, int) or offset < 0:
            raise CorruptionError(f"tensor {name!r}: malformed offset/length")
        if length != shape[0] * shape[1] * dtype.itemsize:
            raise CorruptionError(f"tensor {name!r}: length does not match shape and dtype")
        if offset % 8 != 0:
            raise CorruptionError(f"tensor {name!r}: offset {offset} is not 8-byte aligned")
        if offset + length > len(payload):
            raise CorruptionError(f"tensor {name!r}: data runs past the end of the payload")
        spans.append((offset, length, name))
        flat = np.frombuffer(payload, dtype=dtype, count=shape[0] * shape[1], offset=offset)
        arr = flat.astype(np.float64).reshape(shape[0], shape[1])
        if not np.all(np.isfinite(arr)):
            raise CorruptionError(f"tensor {name!r}: payload contains non-finite values")
        tensors[name] = arr

    spans.sort()
    for (off_a, len_a, name_a), (off_b, _, name_b) in zip(spans, spans[1:]):
        if off_a + len_a > off_b:
            raise CorruptionError(f"tensors {name_a!r} and {name_b!r} overlap in the payload")
    return tensors


def write_container_file(path, tensors) -> None:
    Path(path).write_bytes(write_container(tensors))


def read_container_file(path) -> dict[str, np.ndarray]:
    return read_container(Path(path).read_bytes())


@dataclass(frozen=True)
class LayerSpec:
    """One manifest entry before resolution against a container."""

    name: str
    weight: str
    calib: str
    bias: str | None = None


@dataclass(frozen=True)
class ResolvedLayer:
    """A manifest entry with shapes checked against actual tensors."""

    name: str
    weight: str
    calib: str
    bias: str | None
    d_out: int
    d_in: int
    n_samples: int


def load_manifest(source) -> list[LayerSpec]:
    """Read a manifest from a path, JSON string, or already-parsed dict."""
    if isinstance(source, (str, Path)) and not (isinstance(source, str) and source.lstrip().startswith("{")):
        doc = json.loads(Path(source).read_text("utf-8"))
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    if not isinstance(doc, dict) or not isinstance(doc.get("layers"), list):
        raise ValidationError('manifest must be a JSON object with a "layers" array')
    layers = []
    for i, entry in enumerate(doc["layers"]):
        if not isinstance(entry, dict):
            raise ValidationError(f"manifest layer #{i} is not an object")
        try:
            layers.append(
                LayerSpec(
                    name=entry["name"],
                    weight=entry["weight"],
                    calib=entry["calib"],
                    bias=entry.get("bias"),
                )
            )
        except KeyError as exc:
            raise ValidationError(f"manifest layer #{i} is missing field {exc}") from exc
    return layers


def validate_manifest(layers: list[LayerSpec], tensors: Mapping[str, np.ndarray]) -> list[ResolvedLayer]:
    """Check every manifest invariant and return layers with resolved shapes.

    ``tensors`` is the union of the model and calibration containers.  Raises
    :class:`ValidationError` naming the offending layer.
    """
    seen_names: set[str] = set()
    resolved: list[ResolvedLayer] = []
    for layer in layers:
        if layer.name in seen_names:
            raise ValidationError(f"layer '{layer.name}': duplicate layer name in manifest")
        seen_names.add(layer.name)
        for role, key in (("weight", layer.weight), ("calib", layer.calib)):
            if key not in tensors:
                raise ValidationError(f"layer '{layer.name}': {role} tensor {key!r} not found")
        weight = as_matrix(tensors[layer.weight], f"weight {layer.weight!r}")
        calib = as_matrix(tensors[layer.calib], f"calib {layer.calib!r}")
        d_out, d_in = weight.shape
        if calib.shape[1] != d_in:
            raise ValidationError(
                f"layer '{layer.name}': calibration width {calib.shape[1]} "
                f"does not match weight d_in {d_in}"
            )
        if layer.bias is not None:
            if layer.bias not in tensors:
                raise ValidationError(f"layer '{layer.name}': bias tensor {layer.bias!r} not found")
            bias = np.asarray(tensors[layer.bias])
            if bias.size != d_out:
                raise ValidationError(
                    f"layer '{layer.name}': bias has {bias.size} elements, expected {d_out}"
                )
        resolved.append(
            ResolvedLayer(
                name=layer.name,
                weight=layer.weight,
                calib=layer.calib,
                bias=layer.bias,
                d_out=d_out,
                d_in=d_in,
                n_samples=calib.shape[0],
            )
        )
    return resolved
