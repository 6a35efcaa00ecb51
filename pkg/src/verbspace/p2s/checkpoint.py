"""Versioned checkpoint container (safetensors bytes with JSON metadata)."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import safetensors.numpy as st

from verbspace import fileio
from verbspace.errors import FingerprintMismatch, VerbSpaceError
from verbspace.p2s.model import HyperParams

FORMAT = "verbspace-checkpoint"
VERSION = 1


class MalformedCheckpoint(VerbSpaceError, ValueError):
    pass


def _canonical(data: bytes) -> bytes:
    """Re-emit the safetensors header with sorted keys.

    The library writes the metadata map in hash order, which would make
    identical checkpoints differ byte-wise between processes. Tensor offsets
    are relative to the data section, so only the header changes.
    """
    (hlen,) = struct.unpack_from("<Q", data)
    header = json.loads(data[8 : 8 + hlen])
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    raw += b" " * (-len(raw) % 8)
    return struct.pack("<Q", len(raw)) + raw + data[8 + hlen :]


@dataclass(eq=False)
class Checkpoint:
    hp: HyperParams
    params: dict[str, np.ndarray]
    node_ids: tuple[str, ...]
    node_features: np.ndarray
    fingerprint: str = ""
    phase: int = 1
    metrics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.node_ids)

    def check_fingerprint(self, fingerprint: str) -> None:
        if self.fingerprint != fingerprint:
            raise FingerprintMismatch(f"checkpoint was trained on taxonomy {self.fingerprint[:12]}, "
                                      f"got {fingerprint[:12]}")

    def to_bytes(self) -> bytes:
        tensors = {f"param/{k}": np.ascontiguousarray(v, dtype=np.float64) for k, v in self.params.items()}
        tensors["node_features"] = np.ascontiguousarray(self.node_features, dtype=np.float64)
        meta = {
            "format": FORMAT,
            "version": str(VERSION),
            "hyperparams": json.dumps(self.hp.to_dict(), sort_keys=True),
            "node_ids": json.dumps(list(self.node_ids)),
            "fingerprint": self.fingerprint,
            "phase": str(self.phase),
            "metrics": json.dumps(self.metrics, sort_keys=True),
            "config": json.dumps(self.config, sort_keys=True),
            # safetensors stores 0-d arrays as shape (1,)
            "shapes": json.dumps({k: list(np.shape(v)) for k, v in self.params.items()}, sort_keys=True),
        }
        return _canonical(st.save(tensors, metadata=meta))

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        try:
            (hlen,) = struct.unpack_from("<Q", data)
            meta = json.loads(data[8 : 8 + hlen])["__metadata__"]
            tensors = st.load(data)
        except Exception as exc:  # safetensors raises its own error types
            raise MalformedCheckpoint(f"unreadable checkpoint: {exc}") from exc
        if meta.get("format") != FORMAT or meta.get("version") != str(VERSION):
            raise MalformedCheckpoint(f"not a version-{VERSION} {FORMAT}")
        shapes = json.loads(meta.get("shapes", "{}"))
        params = {}
        for key, v in tensors.items():
            if key.startswith("param/"):
                name = key.split("/", 1)[1]
                params[name] = v.reshape(shapes[name]) if name in shapes else v
        return cls(
            hp=HyperParams.from_dict(json.loads(meta["hyperparams"])),
            params=params,
            node_ids=tuple(json.loads(meta["node_ids"])),
            node_features=tensors["node_features"],
            fingerprint=meta["fingerprint"],
            phase=int(meta["phase"]),
            metrics=json.loads(meta["metrics"]),
            config=json.loads(meta["config"]),
        )

    def save(self, path) -> None:
        fileio.atomic_write(path, self.to_bytes())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())
