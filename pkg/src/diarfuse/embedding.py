"""Embedding vectors, frame-rate embedding streams and the EMBS file format.

EMBS layout (little-endian)::

    b"EMBS" | u32 version=1 | u32 dim | u32 frame_period_ms
    | u32 start_offset_ms | u32 channel | u64 count | f32[count * dim]

An all-zero frame marks an instant where the channel carries no speech;
such frames never enter segmentation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"EMBS"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIIQ")


class EmbeddingFormatError(ValueError):
    pass


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0 or not np.isfinite(n):
        raise ValueError("cannot normalize a zero or non-finite vector")
    return v / n


def centroid(vectors: Sequence) -> np.ndarray:
    """Unit-length arithmetic mean of ``vectors``."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("centroid needs a nonempty list of equal-length vectors")
    mean = arr.mean(axis=0)
    if np.linalg.norm(mean) == 0:
        raise ValueError("mean vector has zero norm")
    return normalize(mean)


def similarity_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity between the rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    an = a / np.linalg.norm(a, axis=1, keepdims=True)
    bn = b / np.linalg.norm(b, axis=1, keepdims=True)
    return np.clip(an @ bn.T, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class EmbeddingStream:
    """Fixed-rate embedding sequence for one channel of one recording.

    Frame ``i`` covers ``[start_offset_ms + i * frame_period_ms,
    start_offset_ms + (i + 1) * frame_period_ms)``.
    """

    recording_id: str
    channel: int
    dim: int
    frames: np.ndarray = field(repr=False)
    frame_period_ms: int = 80
    start_offset_ms: int = 0

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.frame_period_ms <= 0:
            raise ValueError("frame_period_ms must be positive")
        if self.start_offset_ms < 0:
            raise ValueError("start_offset_ms must be >= 0")
        frames = np.asarray(self.frames, dtype=np.float32).reshape(-1, self.dim)
        if not np.isfinite(frames).all():
            raise ValueError("embedding frames must be finite")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingStream):
            return NotImplemented
        return (
            self.recording_id == other.recording_id
            and self.channel == other.channel
            and self.dim == other.dim
            and self.frame_period_ms == other.frame_period_ms
            and self.start_offset_ms == other.start_offset_ms
            and self.frames.shape == other.frames.shape
            and self.frames.tobytes() == other.frames.tobytes()
        )

    def frame_start(self, i: int) -> int:
        return self.start_offset_ms + i * self.frame_period_ms

    @property
    def end_ms(self) -> int:
        return self.frame_start(len(self))

    def active(self) -> np.ndarray:
        """Boolean mask of frames carrying an embedding (nonzero norm)."""
        return np.any(self.frames != 0, axis=1)


def save_embeddings(s: EmbeddingStream) -> bytes:
    header = _HEADER.pack(
        MAGIC, VERSION, s.dim, s.frame_period_ms, s.start_offset_ms, s.channel, len(s)
    )
    return header + s.frames.astype("<f4", copy=False).tobytes()


def load_embeddings(data: bytes, recording_id: str = "") -> EmbeddingStream:
    if len(data) < _HEADER.size:
        raise EmbeddingFormatError("truncated header")
    magic, version, dim, period, offset, channel, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise EmbeddingFormatError(f"unsupported version {version}")
    if dim == 0:
        raise EmbeddingFormatError("dim must be positive")
    if period == 0:
        raise EmbeddingFormatError("frame period must be positive")
    need = count * dim * 4
    payload = memoryview(data)[_HEADER.size :]
    if len(payload) < need:
        raise EmbeddingFormatError(
            f"truncated payload: expected {need} bytes, found {len(payload)}"
        )
    if len(payload) > need:
        raise EmbeddingFormatError(f"{len(payload) - need} trailing bytes after payload")
    frames = np.frombuffer(payload, dtype="<f4", count=count * dim).reshape(count, dim)
    return EmbeddingStream(
        recording_id=recording_id,
        channel=channel,
        dim=dim,
        frames=frames.astype(np.float32),
        frame_period_ms=period,
        start_offset_ms=offset,
    )


def read_embeddings(path) -> EmbeddingStream:
    path = Path(path)
    # recording id is the file stem up to the first dot (rec.ch0.embs -> rec)
    return load_embeddings(path.read_bytes(), recording_id=path.name.split(".")[0])


def write_embeddings(path, s: EmbeddingStream) -> None:
    Path(path).write_bytes(save_embeddings(s))
