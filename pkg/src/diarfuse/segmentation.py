"""Split speech regions into speaker-homogeneous segments.

Frames falling in a region are first grouped two by two; neighbouring
segments are then merged greedily, most similar pair first, until no
adjacent pair reaches the merge threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingStream
from .timeline import Segment, Timeline


@dataclass(frozen=True)
class SegmentationConfig:
    merge_threshold: float = 0.55

    def __post_init__(self):
        if not -1.0 <= self.merge_threshold <= 1.01:
            raise ValueError(f"merge_threshold out of range: {self.merge_threshold}")


@dataclass(frozen=True, eq=False)
class EmbeddedSegment:
    """A time segment together with the frames that produced it.

    ``frame_sum`` is the raw (unnormalized) sum of the member frames; merged
    segments and clusters derive their mean embedding from it.
    """

    segment: Segment
    channel: int
    embedding: np.ndarray = field(repr=False)
    frame_span: tuple[int, int]
    frame_sum: np.ndarray = field(repr=False)

    @property
    def start_ms(self) -> int:
        return self.segment.start_ms

    @property
    def end_ms(self) -> int:
        return self.segment.end_ms

    @property
    def duration(self) -> int:
        return self.segment.duration

    @property
    def n_frames(self) -> int:
        return self.frame_span[1]


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _make(seg: Segment, channel: int, first: int, count: int,
          frame_sum: np.ndarray) -> EmbeddedSegment:
    return EmbeddedSegment(seg, channel, _unit(frame_sum), (first, count), frame_sum)


def frames_in_region(stream: EmbeddingStream, region: Segment) -> range:
    """Indices of frames whose midpoint falls inside ``region``."""
    p, off = stream.frame_period_ms, stream.start_offset_ms
    # midpoint off + i*p + p/2 in [start, end)  <=>  2(start-off) <= (2i+1)p < 2(end-off)
    lo = -(-(2 * (region.start_ms - off) - p) // (2 * p))
    hi = -(-(2 * (region.end_ms - off) - p) // (2 * p))
    return range(max(lo, 0), min(max(hi, 0), len(stream)))


def initial_segments(stream: EmbeddingStream, region: Segment) -> list[EmbeddedSegment]:
    """Pair consecutive active frames of ``region`` into 160 ms segments.

    An odd-length run of active frames ends with a 3-frame segment; a run
    of one frame yields a single 1-frame segment.  Inactive (all-zero)
    frames split runs.
    """
    idx = frames_in_region(stream, region)
    if not idx:
        return []
    frames = stream.frames[idx.start : idx.stop].astype(np.float64)
    active = np.any(frames != 0, axis=1)
    out: list[EmbeddedSegment] = []
    i, n = 0, len(frames)
    while i < n:
        if not active[i]:
            i += 1
            continue
        j = i
        while j < n and active[j]:
            j += 1
        run = j - i
        starts = list(range(i, j - 1, 2)) if run > 1 else [i]
        for k, s in enumerate(starts):
            e = j if k == len(starts) - 1 else s + 2
            seg = Segment(stream.frame_start(idx.start + s), stream.frame_start(idx.start + e))
            out.append(_make(seg, stream.channel, idx.start + s, e - s, frames[s:e].sum(axis=0)))
        i = j
    return out


def ahc_merge_neighbors(
    segs: list[EmbeddedSegment], cfg: SegmentationConfig = SegmentationConfig()
) -> list[EmbeddedSegment]:
    """Greedy agglomeration restricted to time-adjacent segment pairs.

    Only contiguous neighbours (``end == next start``, same channel) are
    candidates.  Ties go to the earliest pair.
    """
    n = len(segs)
    if n < 2:
        return list(segs)
    sums = np.stack([s.frame_sum for s in segs]).astype(np.float64)
    first = np.array([s.frame_span[0] for s in segs])
    count = np.array([s.frame_span[1] for s in segs])
    starts = [s.start_ms for s in segs]
    ends = [s.end_ms for s in segs]
    nxt = list(range(1, n)) + [-1]
    prv = [-1] + list(range(n - 1))

    def pair_sim(i: int) -> float:
        j = nxt[i]
        if j < 0 or ends[i] != starts[j] or segs[i].channel != segs[j].channel:
            return -np.inf
        a, b = sums[i], sums[j]
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0 or nb == 0:
            return -np.inf
        return float(np.dot(a, b) / (na * nb))

    sim = np.array([pair_sim(i) for i in range(n)])
    while True:
        k = int(np.argmax(sim))
        if not sim[k] >= cfg.merge_threshold:
            break
        j = nxt[k]
        sums[k] += sums[j]
        count[k] += count[j]
        ends[k] = ends[j]
        nxt[k] = nxt[j]
        if nxt[j] >= 0:
            prv[nxt[j]] = k
        sim[j] = -np.inf
        sim[k] = pair_sim(k)
        if prv[k] >= 0:
            sim[prv[k]] = pair_sim(prv[k])

    out = []
    i = 0
    while i >= 0:
        seg = segs[i]
        if count[i] == seg.n_frames:
            out.append(seg)
        else:
            out.append(_make(Segment(starts[i], ends[i]), seg.channel,
                             int(first[i]), int(count[i]), sums[i].copy()))
        i = nxt[i]
    return out


def segment_stream(
    stream: EmbeddingStream, regions: Timeline, cfg: SegmentationConfig = SegmentationConfig()
) -> list[EmbeddedSegment]:
    """Segment every speech region of one channel; regions never share a segment."""
    out: list[EmbeddedSegment] = []
    for region in regions:
        out.extend(ahc_merge_neighbors(initial_segments(stream, region), cfg))
    return out
