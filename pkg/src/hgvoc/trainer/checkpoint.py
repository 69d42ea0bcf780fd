"""Checkpoint persistence.

Layout (little endian): magic ``HGCK``, u32 format version, u32 header
length, a UTF-8 header of ``key=value`` metadata lines plus one
``tensor=name|dims|offset|nbytes`` directory line per array, the
contiguous float32 payload, and a trailing u64 FNV-1a digest of the
payload.  Round trips are bit-exact and any single corrupted payload
byte changes the digest.
"""

import struct

import numpy as np

from .. import backend

MAGIC = b"HGCK"
VERSION = 1


class CheckpointError(RuntimeError):
    """Bad magic, version, digest, or truncated file."""


def save_checkpoint(path, tensors, meta):
    """tensors: ordered {name: float32 array}; meta: {str: str|int|float}."""
    lines = []
    for key, value in meta.items():
        if "\n" in str(value) or "=" in key:
            raise CheckpointError(f"invalid metadata entry {key!r}")
        lines.append(f"{key}={value}")
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f4")  # tobytes serializes in C order
        dims = ",".join(str(d) for d in arr.shape) or "scalar"
        lines.append(f"tensor={name}|{dims}|{offset}|{arr.nbytes}")
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = "\n".join(lines).encode("utf-8")
    payload = b"".join(blobs)
    digest = backend.fnv1a64(payload)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<Q", digest))


def load_checkpoint(path):
    """Returns (tensors {name: float32 array}, meta {str: str})."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic (not a checkpoint)")
    version, header_len = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise CheckpointError(
            f"{path}: format version {version}, this build reads {VERSION}")
    header_end = 12 + header_len
    if len(raw) < header_end + 8:
        raise CheckpointError(f"{path}: truncated header")
    header = raw[12:header_end].decode("utf-8")

    meta = {}
    directory = []
    for line in header.splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        if key == "tensor":
            name, dims, off, nbytes = value.split("|")
            shape = () if dims == "scalar" else tuple(int(d) for d in dims.split(","))
            directory.append((name, shape, int(off), int(nbytes)))
        else:
            meta[key] = value

    payload_len = sum(n for _, _, _, n in directory)
    payload_end = header_end + payload_len
    if len(raw) < payload_end + 8:
        raise CheckpointError(f"{path}: truncated payload")
    payload = raw[header_end:payload_end]
    (stored_digest,) = struct.unpack_from("<Q", raw, payload_end)
    digest = backend.fnv1a64(payload)
    if digest != stored_digest:
        raise CheckpointError(
            f"{path}: digest mismatch (stored {stored_digest:#018x}, "
            f"computed {digest:#018x}); file is corrupt")

    tensors = {}
    for name, shape, off, nbytes in directory:
        arr = np.frombuffer(payload, dtype="<f4", count=nbytes // 4,
                            offset=off).reshape(shape).copy()
        tensors[name] = arr
    return tensors, meta
