"""Directory archives: a checksummed JSON manifest plus raw float64 matrix blobs.

Blob layout (``*.mat64``): a 16-byte little-endian header
``magic(4s) version(u32) rows(u32) cols(u32)`` followed by ``rows * cols``
column-major little-endian float64 values.
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..errors import ArchiveError, ChecksumError, TruncatedBlobError, VersionError

MAGIC = b"MM64"
BLOB_VERSION = 1
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIII")
MANIFEST = "manifest"
CHECKSUM_KEY = "manifest_sha256"


def encode_matrix(M):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ArchiveError(f"only matrices can be archived, got ndim={M.ndim}")
    rows, cols = M.shape
    return HEADER.pack(MAGIC, BLOB_VERSION, rows, cols) + M.astype("<f8").tobytes(order="F")


def decode_matrix(raw, name="blob", expect_shape=None):
    if len(raw) < HEADER.size:
        raise TruncatedBlobError(f"{name}: {len(raw)} bytes is shorter than the {HEADER.size}-byte header")
    magic, version, rows, cols = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ChecksumError(f"{name}: bad magic {magic!r}")
    if version != BLOB_VERSION:
        raise VersionError(f"{name}: blob version {version} is not supported (expected {BLOB_VERSION})")
    need = HEADER.size + 8 * rows * cols
    if len(raw) < need:
        raise TruncatedBlobError(f"{name}: expected {need} bytes, found {len(raw)}")
    if len(raw) > need:
        raise ChecksumError(f"{name}: {len(raw) - need} trailing bytes")
    if expect_shape is not None and tuple(expect_shape) != (rows, cols):
        raise ChecksumError(f"{name}: header shape {(rows, cols)} disagrees with manifest {tuple(expect_shape)}")
    data = np.frombuffer(raw, dtype="<f8", offset=HEADER.size, count=rows * cols)
    return data.reshape((rows, cols), order="F").astype(float)


def _canonical(obj):
    return (json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n").encode("utf-8")


def _sha256(raw):
    return hashlib.sha256(raw).hexdigest()


def write_archive(path, manifest, matrices):
    """Write ``matrices`` (name -> array) and ``manifest`` atomically to directory ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
    try:
        shapes, sums = {}, {}
        for name, M in matrices.items():
            raw = encode_matrix(M)
            blob = tmp / f"{name}.mat64"
            blob.parent.mkdir(parents=True, exist_ok=True)
            blob.write_bytes(raw)
            shapes[name] = list(HEADER.unpack_from(raw)[2:])
            sums[name] = _sha256(raw)
        doc = dict(manifest)
        doc.setdefault("format_version", FORMAT_VERSION)
        doc["shapes"] = shapes
        doc["blobs"] = sums
        doc.pop(CHECKSUM_KEY, None)
        doc[CHECKSUM_KEY] = _sha256(_canonical(doc))
        (tmp / MANIFEST).write_bytes(_canonical(doc))
        if path.exists():
            shutil.rmtree(path)
        os.replace(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return path


def read_manifest(path):
    path = Path(path)
    mpath = path / MANIFEST
    if not mpath.is_file():
        raise ArchiveError(f"no manifest in {path}")
    raw = mpath.read_bytes()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChecksumError(f"manifest of {path} is corrupt: {exc}") from exc
    if not isinstance(doc, dict):
        raise ChecksumError(f"manifest of {path} is not an object")
    # integrity before version: a flipped version digit is corruption, not a newer format
    stored = doc.pop(CHECKSUM_KEY, None)
    if stored != _sha256(_canonical(doc)):
        raise ChecksumError(f"manifest checksum mismatch in {path}")
    doc[CHECKSUM_KEY] = stored
    if raw != _canonical(doc):
        raise ChecksumError(f"manifest of {path} is not in canonical form")
    version = doc.get("format_version")
    if not isinstance(version, int) or version > FORMAT_VERSION or version < 1:
        raise VersionError(f"archive format version {version!r} is not supported (max {FORMAT_VERSION})")
    return doc


def read_archive(path):
    """Verify and load every blob. Nothing is returned unless all blobs check out."""
    path = Path(path)
    doc = read_manifest(path)
    matrices = {}
    for name, digest in doc["blobs"].items():
        bpath = path / f"{name}.mat64"
        if not bpath.is_file():
            raise ArchiveError(f"blob {name} missing from {path}")
        raw = bpath.read_bytes()
        rows, cols = doc["shapes"][name]
        if len(raw) < HEADER.size + 8 * rows * cols:
            raise TruncatedBlobError(f"blob {name}: expected {HEADER.size + 8 * rows * cols} bytes, found {len(raw)}")
        if _sha256(raw) != digest:
            raise ChecksumError(f"checksum mismatch in blob {name}")
        matrices[name] = decode_matrix(raw, name, (rows, cols))
    return doc, matrices
