"""File formats shared by the pipeline and atomic writes.

Feature file layout (little-endian)::

    b"PGEA" | u32 version=1 | u32 count | u32 dim | count*dim float32, row-major

Sample ids live in a sidecar text file (``<path>.ids``), one id per line in
row order.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from verbspace.errors import MalformedFeatureFile

MAGIC = b"PGEA"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def atomic_write(path, data: bytes) -> None:
    """Write via a temp file in the target directory and rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def ids_path(path) -> Path:
    return Path(str(path) + ".ids")


def encode_features(matrix: np.ndarray) -> bytes:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    count, dim = matrix.shape
    return _HEADER.pack(MAGIC, VERSION, count, dim) + matrix.tobytes()


def decode_features(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise MalformedFeatureFile("truncated header")
    magic, version, count, dim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MalformedFeatureFile(f"bad magic {magic!r}")
    if version != VERSION:
        raise MalformedFeatureFile(f"unsupported version {version}")
    expected = _HEADER.size + 4 * count * dim
    if len(data) != expected:
        raise MalformedFeatureFile(f"expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(count, dim).copy()


def write_features(path, ids: Sequence[str], matrix: np.ndarray) -> None:
    if len(ids) != len(matrix):
        raise ValueError(f"{len(ids)} ids for {len(matrix)} rows")
    if any("\n" in i for i in ids):
        raise ValueError("sample ids must not contain newlines")
    atomic_write(path, encode_features(matrix))
    atomic_write(ids_path(path), "".join(f"{i}\n" for i in ids).encode("utf-8"))


def read_features(path) -> tuple[list[str], np.ndarray]:
    matrix = decode_features(Path(path).read_bytes())
    ids = Path(ids_path(path)).read_text(encoding="utf-8").splitlines()
    if len(ids) != len(matrix):
        raise MalformedFeatureFile(f"{len(ids)} ids for {len(matrix)} rows")
    return ids, matrix


def dump_jsonl(records: Iterable[dict]) -> bytes:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in records).encode("utf-8")


def iter_jsonl(path) -> Iterator[tuple[int, object]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                yield lineno, json.loads(line)
