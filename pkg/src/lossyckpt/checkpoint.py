"""Checkpoint/restart layer: traditional (bit-exact) and lossy image capture.

For restarted methods the only dynamic variable worth persisting is the
approximate solution vector x together with its iteration index; recovery
rebuilds every auxiliary vector from x. Compute times (compression and
decompression) are measured on this machine unless the caller injects values;
I/O time is always modeled as payload size over a configured bandwidth, since
real checkpoint media are whatever this host happens to have.
"""

from __future__ import annotations

import hashlib
import os
import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import compressor
from .errors import CheckpointFailedError, ParameterError, UnrecoverableImageError
from .solvers import SolveConfig, rebuild_from_solution

IMAGE_MAGIC = b"CKPTIMG1"
IMAGE_VERSION = 1
PAYLOAD_RAW = 0
PAYLOAD_LOSSY = 1
_HEADER = "<IQBQQ"  # version, iteration, kind, payload length, checksum


def _checksum(payload: bytes) -> int:
    """64-bit content hash of the payload bytes."""
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class CheckpointImage:
    """One committed snapshot: iteration index plus a raw or lossy payload."""

    iteration: int
    kind: int
    payload: bytes
    checksum: int
    created_at: float = 0.0

    def __post_init__(self):
        if self.kind not in (PAYLOAD_RAW, PAYLOAD_LOSSY):
            raise ParameterError(f"unknown payload kind {self.kind}")

    @property
    def nbytes(self) -> int:
        return len(IMAGE_MAGIC) + struct.calcsize(_HEADER) + len(self.payload)

    def to_bytes(self) -> bytes:
        return IMAGE_MAGIC + struct.pack(_HEADER, IMAGE_VERSION, self.iteration,
                                         self.kind, len(self.payload),
                                         self.checksum) + self.payload

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CheckpointImage":
        head = len(IMAGE_MAGIC) + struct.calcsize(_HEADER)
        if len(blob) < head or blob[:8] != IMAGE_MAGIC:
            raise UnrecoverableImageError("not a checkpoint image (bad magic)")
        version, iteration, kind, length, checksum = struct.unpack_from(_HEADER, blob, 8)
        if version != IMAGE_VERSION:
            raise UnrecoverableImageError(f"unsupported image version {version}")
        payload = blob[head:]
        if len(payload) != length:
            raise UnrecoverableImageError("payload length disagrees with header")
        if _checksum(payload) != checksum:
            raise UnrecoverableImageError("checksum mismatch: image is corrupt")
        if kind not in (PAYLOAD_RAW, PAYLOAD_LOSSY):
            raise UnrecoverableImageError(f"unknown payload kind {kind}")
        return cls(iteration=iteration, kind=kind, payload=payload, checksum=checksum)


@dataclass
class StorageTarget:
    """Checkpoint destination: in-memory by default, file-backed when path is set.

    Bandwidths are bytes per simulated time unit and only shape the modeled
    I/O cost; commits themselves are atomic (write-then-swap for files).
    """

    write_bandwidth: Optional[float] = None
    read_bandwidth: Optional[float] = None
    path: Optional[Union[str, Path]] = None
    _last_good: Optional[CheckpointImage] = None

    def __post_init__(self):
        for bw in (self.write_bandwidth, self.read_bandwidth):
            if bw is not None and bw <= 0:
                raise ParameterError("bandwidths must be positive when given")

    def write_time(self, nbytes: int) -> float:
        return nbytes / self.write_bandwidth if self.write_bandwidth else 0.0

    def read_time(self, nbytes: int) -> float:
        return nbytes / self.read_bandwidth if self.read_bandwidth else 0.0

    def commit(self, image: CheckpointImage) -> None:
        if self.path is not None:
            path = Path(self.path)
            tmp = path.with_name(path.name + ".tmp")
            try:
                tmp.write_bytes(image.to_bytes())
                os.replace(tmp, path)
            except OSError as exc:
                raise CheckpointFailedError(f"commit failed: {exc}") from exc
        self._last_good = image

    def load_last(self) -> Optional[CheckpointImage]:
        if self.path is not None:
            path = Path(self.path)
            if not path.exists():
                return None
            return CheckpointImage.from_bytes(path.read_bytes())
        return self._last_good


@dataclass(frozen=True)
class CkptCost:
    """Checkpoint cost split: compression compute plus modeled write time."""

    payload_bytes: int
    t_compress: float
    t_write: float

    @property
    def total(self) -> float:
        return self.t_compress + self.t_write


@dataclass(frozen=True)
class RecCost:
    """Recovery cost split: modeled read time plus decompression compute."""

    payload_bytes: int
    t_read: float
    t_decompress: float

    @property
    def total(self) -> float:
        return self.t_read + self.t_decompress


def checkpoint_traditional(state, target: StorageTarget, created_at: float = 0.0,
                           commit: bool = True):
    """Snapshot (iteration, x) bit-exactly as raw little-endian doubles."""
    payload = np.ascontiguousarray(state.x, dtype="<f8").tobytes()
    image = CheckpointImage(iteration=state.iteration, kind=PAYLOAD_RAW,
                            payload=payload, checksum=_checksum(payload),
                            created_at=created_at)
    if commit:
        target.commit(image)
    return image, CkptCost(payload_bytes=image.nbytes, t_compress=0.0,
                           t_write=target.write_time(image.nbytes))


def checkpoint_lossy(state, config: compressor.CompressorConfig, target: StorageTarget,
                     created_at: float = 0.0, t_comp_override: Optional[float] = None,
                     commit: bool = True):
    """Snapshot (iteration, compressed x); t_comp is measured unless injected."""
    t0 = time.perf_counter()
    block = compressor.compress(state.x, config)
    t_comp = time.perf_counter() - t0 if t_comp_override is None else t_comp_override
    payload = block.to_bytes()
    image = CheckpointImage(iteration=state.iteration, kind=PAYLOAD_LOSSY,
                            payload=payload, checksum=_checksum(payload),
                            created_at=created_at)
    if commit:
        target.commit(image)
    return image, CkptCost(payload_bytes=image.nbytes, t_compress=t_comp,
                           t_write=target.write_time(image.nbytes))


def decode_payload(image: CheckpointImage) -> np.ndarray:
    """Recover the checkpointed x (decompressing if the payload is lossy)."""
    if _checksum(image.payload) != image.checksum:
        raise UnrecoverableImageError("checksum mismatch: image is corrupt")
    if image.kind == PAYLOAD_RAW:
        return np.frombuffer(image.payload, dtype="<f8").astype(np.float64)
    return compressor.decompress(compressor.CompressedBlock.from_bytes(image.payload))


def recover(image: CheckpointImage, method: str, a, m, b, config: SolveConfig,
            target: Optional[StorageTarget] = None,
            t_decomp_override: Optional[float] = None):
    """Rebuild a full solver state from an image; returns (state, RecCost)."""
    t0 = time.perf_counter()
    x = decode_payload(image)
    t_dec = time.perf_counter() - t0
    if image.kind == PAYLOAD_RAW:
        t_dec = 0.0
    if t_decomp_override is not None:
        t_dec = t_decomp_override
    state = rebuild_from_solution(method, a, m, b, x, image.iteration, config)
    t_read = target.read_time(image.nbytes) if target is not None else 0.0
    return state, RecCost(payload_bytes=image.nbytes, t_read=t_read, t_decompress=t_dec)
