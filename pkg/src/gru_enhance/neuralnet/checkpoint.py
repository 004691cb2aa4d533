"""Checkpoint persistence.

File layout (little-endian)::

    8 bytes   magic b"GRUENHCK"
    uint32    format version
    uint32    manifest length in bytes
    manifest  UTF-8 JSON: arch, tensor names and shapes, training metadata,
              content hash
    tensors   float32, in manifest order

The content hash is a git-style blob SHA-1 over the tensor bytes, so
``git hash-object`` on the tensor section reproduces it.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from gru_enhance._version import __version__
from gru_enhance.errors import ConfigMismatchError, CorruptCheckpointError
from gru_enhance.neuralnet.model import ArchConfig, ModelParams

MAGIC = b"GRUENHCK"
FORMAT_VERSION = 1
HEADER = struct.Struct("<8sII")
TENSOR_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    """Loaded checkpoint.

    Attributes:
        params: Network parameters (float32).
        meta: Training metadata recorded at save time.
        extra: Additional tensors (optimizer moments), by name.
        content_hash: Hash stored in the manifest.
    """

    params: ModelParams
    meta: dict[str, Any] = field(default_factory=dict)
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    content_hash: str = ""

    @property
    def arch(self) -> ArchConfig:
        return self.params.arch


def content_hash(data: bytes) -> str:
    """Git blob SHA-1 of data."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def save_checkpoint(
    params: ModelParams,
    cfg: ArchConfig,
    training_meta: dict[str, Any],
    path: Union[str, Path],
    extra: Optional[dict[str, np.ndarray]] = None,
) -> str:
    """Write params (and optional extra tensors) to path.

    Args:
        params: Parameters to store; cast to float32.
        cfg: Architecture the params belong to.
        training_meta: JSON-serializable run metadata (task, loss, projection, seed, step, ...).
        path: Destination; replaced atomically.
        extra: Additional named tensors.

    Returns:
        The content hash.

    Raises:
        ConfigMismatchError: If cfg differs from params.arch.
    """
    if cfg != params.arch:
        raise ConfigMismatchError(f"params were built for {params.arch}, not {cfg}")
    tensors = dict(params.items())
    for name, value in (extra or {}).items():
        if name in tensors:
            raise ConfigMismatchError(f"extra tensor {name!r} shadows a parameter")
        tensors[name] = value

    blobs = [np.ascontiguousarray(t, dtype=TENSOR_DTYPE).tobytes() for t in tensors.values()]
    payload = b"".join(blobs)
    digest = content_hash(payload)
    manifest = {
        "format": FORMAT_VERSION,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "arch": cfg.to_dict(),
        "params": list(params),
        "tensors": [{"name": n, "shape": list(np.shape(t))} for n, t in tensors.items()],
        "training": training_meta,
        "content_hash": digest,
    }
    manifest_bytes = json.dumps(manifest, indent=2, sort_keys=False).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(HEADER.pack(MAGIC, FORMAT_VERSION, len(manifest_bytes)))
        f.write(manifest_bytes)
        f.write(payload)
    os.replace(tmp, path)
    return digest


def read_manifest(path: Union[str, Path]) -> tuple[dict[str, Any], bytes]:
    """Return (manifest, tensor bytes) after structural checks."""
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise
    except OSError as e:
        raise CorruptCheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    if len(data) < HEADER.size:
        raise CorruptCheckpointError(f"{path} is too short to be a checkpoint")
    magic, version, manifest_len = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptCheckpointError(f"{path} is not a gru-enhance checkpoint")
    if version != FORMAT_VERSION:
        raise CorruptCheckpointError(f"{path} has unsupported format version {version}")
    end = HEADER.size + manifest_len
    if len(data) < end:
        raise CorruptCheckpointError(f"{path} is truncated inside the manifest")
    try:
        manifest = json.loads(data[HEADER.size : end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpointError(f"{path} has an unreadable manifest: {e}") from e
    return manifest, data[end:]


def load_checkpoint(
    path: Union[str, Path],
    expected_arch: Optional[ArchConfig] = None,
    channels: Optional[int] = None,
) -> Checkpoint:
    """Load and verify a checkpoint.

    Args:
        path: Checkpoint file.
        expected_arch: If given, the stored arch must equal it.
        channels: If given, the stored arch must have this many input channels.

    Raises:
        CorruptCheckpointError: Truncated file, bad header, or hash mismatch.
        ConfigMismatchError: Stored arch differs from what was requested.
    """
    manifest, payload = read_manifest(path)
    try:
        arch = ArchConfig.from_dict(manifest["arch"])
        specs = [(t["name"], tuple(t["shape"])) for t in manifest["tensors"]]
        param_names = list(manifest["params"])
        stored_hash = manifest["content_hash"]
    except (KeyError, TypeError) as e:
        raise CorruptCheckpointError(f"{path} manifest is missing {e}") from e

    expected_bytes = sum(int(np.prod(s)) for _, s in specs) * TENSOR_DTYPE.itemsize
    if len(payload) != expected_bytes:
        raise CorruptCheckpointError(
            f"{path} is truncated",
            details=f"expected {expected_bytes} tensor bytes, found {len(payload)}",
        )
    if content_hash(payload) != stored_hash:
        raise CorruptCheckpointError(f"{path} failed its content hash check")

    if expected_arch is not None and arch != expected_arch:
        raise ConfigMismatchError(f"checkpoint arch {arch} differs from requested {expected_arch}")
    if channels is not None and arch.channels != channels:
        raise ConfigMismatchError(
            f"checkpoint expects {arch.channels}-channel input, this run provides {channels}"
        )

    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in specs:
        count = int(np.prod(shape))
        tensors[name] = (
            np.frombuffer(payload, dtype=TENSOR_DTYPE, count=count, offset=offset)
            .reshape(shape)
            .astype(np.float32)
        )
        offset += count * TENSOR_DTYPE.itemsize

    params = ModelParams(arch, {n: tensors[n] for n in param_names})
    extra = {n: t for n, t in tensors.items() if n not in params.tensors}
    return Checkpoint(params, manifest.get("training", {}), extra, stored_hash)


__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "Checkpoint",
    "content_hash",
    "save_checkpoint",
    "load_checkpoint",
    "read_manifest",
]
