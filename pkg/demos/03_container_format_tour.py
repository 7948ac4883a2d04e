#!/usr/bin/env python3
"""A tour of the MXPT container: canonical bytes, round trips, typed failures.

Layout: magic "MXPT", u32 version, u64 header length, a zero-padded JSON
header mapping tensor names to dtype/shape/offset/length, then the raw
little-endian payload.  Writing is canonical (names sorted, no whitespace),
so equal tensor sets produce byte-identical files; that is what makes golden
tests and cache keys trivial.
"""

import json
import struct

import numpy as np

from mixprune import CorruptionError, FormatError, read_container, write_container

rng = np.random.default_rng(0)
tensors = {
    "encoder.weight": rng.standard_normal((4, 6)),
    "head.weight": rng.standard_normal((2, 4)).astype(np.float32),
}

blob = write_container(tensors)
print(f"container is {len(blob)} bytes")
print("magic:", blob[:4], " version:", struct.unpack_from('<I', blob, 4)[0])

header_len = struct.unpack_from("<Q", blob, 8)[0]
header = json.loads(blob[16:16 + header_len].rstrip(b"\x00").decode())
print("header:", json.dumps(header, indent=2, sort_keys=True))

loaded = read_container(blob)
print("\nround trip exact for f64:", np.array_equal(loaded["encoder.weight"], tensors["encoder.weight"]))
print("f32 widened to float64:", loaded["head.weight"].dtype)

print("\ncanonical: same tensors in any insertion order give identical bytes:",
      write_container(dict(reversed(list(tensors.items())))) == blob)

print("\ndamage is rejected with typed errors:")
for label, damaged, expected in [
    ("wrong magic", b"ZZZZ" + blob[4:], FormatError),
    ("truncated payload", blob[:-24], CorruptionError),
]:
    try:
        read_container(damaged)
    except expected as exc:
        print(f"  {label}: {type(exc).__name__}: {exc}")
