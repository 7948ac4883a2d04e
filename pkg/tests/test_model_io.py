import json
import struct

import numpy as np
import pytest

from mixprune.errors import CorruptionError, FormatError, ShapeError, ValidationError, VersionError
from mixprune.model_io import (
    FORMAT_VERSION,
    LayerSpec,
    MAGIC,
    load_manifest,
    read_container,
    validate_manifest,
    write_container,
)


def header_of(blob):
    header_len = struct.unpack_from("<Q", blob, 8)[0]
    return json.loads(blob[16 : 16 + header_len].rstrip(b"\x00").decode()), 16 + header_len


class TestWriteContainer:
    def test_empty_tensor_set(self):
        blob = write_container({})
        assert blob[:4] == MAGIC
        header, payload_start = header_of(blob)
        assert header == {}
        assert len(blob) == payload_start
        assert read_container(blob) == {}

    def test_single_2x2_f64_payload_is_32_bytes(self):
        blob = write_container({"w": np.zeros((2, 2))})
        header, payload_start = header_of(blob)
        assert header["w"]["length"] == 32
        assert len(blob) - payload_start == 32

    def test_round_trip_bit_identical(self, rng):
        tensors = {f"t{i:02d}": rng.standard_normal((i + 1, 3)) for i in range(10)}
        loaded = read_container(write_container(tensors))
        assert sorted(loaded) == sorted(tensors)
        for name in tensors:
            assert np.array_equal(loaded[name], tensors[name])

    def test_canonical_bytes_regardless_of_insertion_order(self, rng):
        a = rng.standard_normal((2, 3))
        b = rng.standard_normal((4, 1))
        assert write_container({"a": a, "b": b}) == write_container({"b": b, "a": a})
        assert write_container({"a": a, "b": b}) == write_container({"a": a, "b": b})

    def test_f32_round_trip_after_truncation(self, rng):
        precise = rng.standard_normal((3, 5))
        narrowed = precise.astype(np.float32)
        loaded = read_container(write_container({"w": narrowed}))["w"]
        assert loaded.dtype == np.float64
        assert np.array_equal(loaded, narrowed.astype(np.float64))

    def test_mixed_dtype_alignment(self, rng):
        # f32 tensor of odd byte length forces padding before the next offset
        tensors = {"a": rng.standard_normal((1, 3)).astype(np.float32),
                   "b": rng.standard_normal((2, 2))}
        header, _ = header_of(write_container(tensors))
        for entry in header.values():
            assert entry["offset"] % 8 == 0
        loaded = read_container(write_container(tensors))
        assert np.array_equal(loaded["b"], tensors["b"])

    def test_duplicate_name_rejected(self):
        pairs = [("w", np.zeros((1, 1))), ("w", np.ones((1, 1)))]
        with pytest.raises(FormatError):
            write_container(pairs)

    def test_empty_name_rejected(self):
        with pytest.raises(FormatError):
            write_container({"": np.zeros((1, 1))})

    def test_unsupported_dtype_rejected(self):
        with pytest.raises(FormatError):
            write_container({"w": np.zeros((2, 2), dtype=np.int32)})

    def test_non_2d_rejected(self):
        with pytest.raises(ShapeError):
            write_container({"w": np.zeros(4)})

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            write_container({"w": np.array([[np.nan, 0.0]])})


class TestReadContainerRejectsCorruption:
    @pytest.fixture
    def blob(self, rng):
        return write_container({"w": rng.standard_normal((2, 4)), "v": rng.standard_normal((1, 2))})

    def test_bad_magic(self, blob):
        with pytest.raises(FormatError):
            read_container(b"XXXX" + blob[4:])

    def test_unknown_version(self, blob):
        bad = bytearray(blob)
        struct.pack_into("<I", bad, 4, FORMAT_VERSION + 1)
        with pytest.raises(VersionError):
            read_container(bytes(bad))

    def test_truncated_payload(self, blob):
        with pytest.raises(CorruptionError):
            read_container(blob[:-8])

    def test_truncated_header(self, blob):
        with pytest.raises(CorruptionError):
            read_container(blob[:20])

    def test_overlapping_offsets(self, blob):
        header, payload_start = header_of(blob)
        header["v"]["offset"] = header["w"]["offset"]
        with pytest.raises(CorruptionError):
            read_container(_reassemble(header, blob[payload_start:]))

    def test_out_of_bounds_offset(self, blob):
        header, payload_start = header_of(blob)
        header["v"]["offset"] = 1 << 20
        with pytest.raises(CorruptionError):
            read_container(_reassemble(header, blob[payload_start:]))

    def test_misaligned_offset(self, blob):
        header, payload_start = header_of(blob)
        header["v"]["offset"] += 4
        with pytest.raises(CorruptionError):
            read_container(_reassemble(header, blob[payload_start:]))

    def test_length_shape_mismatch(self, blob):
        header, payload_start = header_of(blob)
        header["w"]["length"] -= 8
        with pytest.raises(CorruptionError):
            read_container(_reassemble(header, blob[payload_start:]))

    def test_header_not_json(self, blob):
        garbage = b"not json" + b"\x00" * 8
        bad = blob[:8] + struct.pack("<Q", len(garbage)) + garbage
        with pytest.raises(CorruptionError):
            read_container(bad)


def _reassemble(header, payload):
    header_json = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    header_json += b"\x00" * ((8 - len(header_json) % 8) % 8)
    return MAGIC + struct.pack("<I", FORMAT_VERSION) + struct.pack("<Q", len(header_json)) + header_json + bytes(payload)


class TestManifest:
    def tensors(self, n=5, d_in=8, d_out=4):
        rng = np.random.default_rng(0)
        return {
            "w": rng.standard_normal((d_out, d_in)),
            "x": rng.standard_normal((n, d_in)),
            "b": rng.standard_normal((d_out, 1)),
        }

    def test_accepts_matching_shapes(self):
        layers = [LayerSpec(name="l0", weight="w", calib="x", bias="b")]
        resolved = validate_manifest(layers, self.tensors())
        assert resolved[0].d_out == 4 and resolved[0].d_in == 8 and resolved[0].n_samples == 5

    def test_missing_tensor_named_in_error(self):
        layers = [LayerSpec(name="l0", weight="nope", calib="x")]
        with pytest.raises(ValidationError, match="l0"):
            validate_manifest(layers, self.tensors())

    def test_calibration_width_mismatch(self):
        tensors = self.tensors()
        tensors["x"] = tensors["x"][:, :7]
        layers = [LayerSpec(name="l0", weight="w", calib="x")]
        with pytest.raises(ValidationError, match="l0"):
            validate_manifest(layers, tensors)

    def test_bias_size_mismatch(self):
        tensors = self.tensors()
        tensors["b"] = np.zeros((3, 1))
        layers = [LayerSpec(name="l0", weight="w", calib="x", bias="b")]
        with pytest.raises(ValidationError, match="bias"):
            validate_manifest(layers, tensors)

    def test_duplicate_layer_names(self):
        layers = [LayerSpec(name="l0", weight="w", calib="x")] * 2
        with pytest.raises(ValidationError, match="duplicate"):
            validate_manifest(layers, self.tensors())

    def test_load_manifest_from_json_string(self):
        doc = '{"layers": [{"name": "l0", "weight": "w", "calib": "x"}]}'
        layers = load_manifest(doc)
        assert layers == [LayerSpec(name="l0", weight="w", calib="x", bias=None)]

    def test_load_manifest_missing_field(self):
        with pytest.raises(ValidationError):
            load_manifest({"layers": [{"name": "l0", "weight": "w"}]})

    def test_load_manifest_not_an_object(self):
        with pytest.raises(ValidationError):
            load_manifest({"not_layers": []})
