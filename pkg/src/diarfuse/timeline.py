"""Interval algebra on integer-millisecond timelines.

Every stage of the toolkit speaks in :class:`Timeline` values: sorted,
disjoint, non-touching runs of ``[start_ms, end_ms)`` segments.  Seconds
only appear at the file boundary (see :mod:`diarfuse.rttm`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True, order=True)
class Segment:
    """Half-open interval ``[start_ms, end_ms)``."""

    start_ms: int
    end_ms: int

    def __post_init__(self):
        if self.start_ms < 0:
            raise ValueError(f"segment starts before 0: {self.start_ms}")
        if self.end_ms <= self.start_ms:
            raise ValueError(
                f"segment must have positive length: [{self.start_ms}, {self.end_ms})"
            )

    @property
    def duration(self) -> int:
        return self.end_ms - self.start_ms


def _normalize(pairs: Iterable[tuple[int, int]]) -> tuple[Segment, ...]:
    ordered = sorted(pairs)
    out: list[list[int]] = []
    for start, end in ordered:
        if out and start <= out[-1][1]:
            if end > out[-1][1]:
                out[-1][1] = end
        else:
            out.append([start, end])
    return tuple(Segment(s, e) for s, e in out)


class Timeline:
    """Immutable set of instants, stored in maximal disjoint normal form.

    Construction accepts segments in any order, possibly overlapping or
    touching; they are merged on the way in so that two timelines covering
    the same instants always compare equal.
    """

    __slots__ = ("_segments",)

    def __init__(self, segments: Iterable[Segment | tuple[int, int]] = ()):
        pairs = []
        for seg in segments:
            if not isinstance(seg, Segment):
                seg = Segment(int(seg[0]), int(seg[1]))
            pairs.append((seg.start_ms, seg.end_ms))
        self._segments = _normalize(pairs)

    @classmethod
    def _trusted(cls, segments: tuple[Segment, ...]) -> "Timeline":
        obj = cls.__new__(cls)
        obj._segments = segments
        return obj

    @property
    def segments(self) -> tuple[Segment, ...]:
        return self._segments

    def __iter__(self):
        return iter(self._segments)

    def __len__(self) -> int:
        return len(self._segments)

    def __bool__(self) -> bool:
        return bool(self._segments)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Timeline):
            return NotImplemented
        return self._segments == other._segments

    def __hash__(self) -> int:
        return hash(self._segments)

    def __repr__(self) -> str:
        body = ", ".join(f"[{s.start_ms},{s.end_ms}]" for s in self._segments)
        return f"Timeline({body})"

    def __getstate__(self):
        return self._segments

    def __setstate__(self, state):
        self._segments = state

    @property
    def start_ms(self) -> int | None:
        return self._segments[0].start_ms if self._segments else None

    @property
    def end_ms(self) -> int | None:
        return self._segments[-1].end_ms if self._segments else None

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        starts = np.fromiter((s.start_ms for s in self._segments), dtype=np.int64)
        ends = np.fromiter((s.end_ms for s in self._segments), dtype=np.int64)
        return starts, ends

    def duration(self) -> int:
        return total_duration(self)

    def union(self, other: "Timeline") -> "Timeline":
        return timeline_union(self, other)

    def intersection(self, other: "Timeline") -> "Timeline":
        return timeline_intersection(self, other)

    def difference(self, other: "Timeline") -> "Timeline":
        return timeline_difference(self, other)

    def crop(self, start_ms: int, end_ms: int) -> "Timeline":
        if end_ms <= start_ms:
            return Timeline()
        return timeline_intersection(self, Timeline([(start_ms, end_ms)]))


def timeline_union(a: Timeline, b: Timeline) -> Timeline:
    if not a:
        return b
    if not b:
        return a
    pairs = [(s.start_ms, s.end_ms) for s in a] + [(s.start_ms, s.end_ms) for s in b]
    return Timeline._trusted(_normalize(pairs))


def timeline_intersection(a: Timeline, b: Timeline) -> Timeline:
    sa, sb = a.segments, b.segments
    i = j = 0
    out: list[Segment] = []
    while i < len(sa) and j < len(sb):
        lo = max(sa[i].start_ms, sb[j].start_ms)
        hi = min(sa[i].end_ms, sb[j].end_ms)
        if lo < hi:
            out.append(Segment(lo, hi))
        if sa[i].end_ms < sb[j].end_ms:
            i += 1
        else:
            j += 1
    # pieces of two normal-form inputs can never touch each other
    return Timeline._trusted(tuple(out))


def timeline_difference(a: Timeline, b: Timeline) -> Timeline:
    """Instants in ``a`` but not in ``b``."""
    out: list[Segment] = []
    sb = b.segments
    j = 0
    for seg in a:
        cursor = seg.start_ms
        while j < len(sb) and sb[j].end_ms <= cursor:
            j += 1
        k = j
        while k < len(sb) and sb[k].start_ms < seg.end_ms:
            if sb[k].start_ms > cursor:
                out.append(Segment(cursor, sb[k].start_ms))
            cursor = max(cursor, sb[k].end_ms)
            k += 1
        if cursor < seg.end_ms:
            out.append(Segment(cursor, seg.end_ms))
    return Timeline._trusted(tuple(out))


def total_duration(t: Timeline) -> int:
    return sum(s.end_ms - s.start_ms for s in t.segments)


def overlap_duration(a: Timeline, b: Timeline) -> int:
    return total_duration(timeline_intersection(a, b))


def elementary_activity(
    timelines: Sequence[Timeline], extra_bounds: Iterable[int] = ()
) -> tuple[np.ndarray, np.ndarray]:
    """Split time at every boundary of ``timelines`` and report who is active.

    Returns ``(bounds, active)`` where ``bounds`` holds the sorted unique
    boundary instants and ``active[k, i]`` tells whether timeline ``k`` covers
    the elementary interval ``[bounds[i], bounds[i + 1])``.  Within an
    elementary interval every timeline is either fully on or fully off.
    """
    points = [b for t in timelines for s in t for b in (s.start_ms, s.end_ms)]
    points.extend(extra_bounds)
    bounds = np.unique(np.asarray(points, dtype=np.int64))
    n_cells = max(len(bounds) - 1, 0)
    active = np.zeros((len(timelines), n_cells), dtype=bool)
    if n_cells == 0:
        return bounds, active
    left = bounds[:-1]
    for k, t in enumerate(timelines):
        if not t:
            continue
        starts, ends = t.as_arrays()
        idx = np.searchsorted(starts, left, side="right") - 1
        ok = idx >= 0
        active[k, ok] = left[ok] < ends[idx[ok]]
    return bounds, active


def timeline_from_mask(bounds: np.ndarray, mask: np.ndarray) -> Timeline:
    """Rebuild a normal-form timeline from elementary cells flagged in ``mask``."""
    if len(bounds) < 2 or not mask.any():
        return Timeline()
    padded = np.concatenate(([False], mask.astype(bool), [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = edges[0::2], edges[1::2]
    return Timeline._trusted(
        tuple(Segment(int(bounds[s]), int(bounds[e])) for s, e in zip(starts, stops))
    )


@dataclass(frozen=True)
class Hypothesis:
    """A diarization: speaker label -> activity timeline for one recording.

    Tracks of different speakers may overlap.  Empty tracks are dropped so
    that equal diarizations compare equal.
    """

    recording_id: str
    tracks: Mapping[str, Timeline] = field(default_factory=dict)

    def __post_init__(self):
        clean = {label: tl for label, tl in sorted(self.tracks.items()) if tl}
        for label in clean:
            if not label or any(ch.isspace() for ch in label):
                raise ValueError(f"invalid speaker label {label!r}")
        object.__setattr__(self, "tracks", clean)

    @property
    def speakers(self) -> list[str]:
        return list(self.tracks)

    def speech(self) -> Timeline:
        out = Timeline()
        for tl in self.tracks.values():
            out = timeline_union(out, tl)
        return out

    def relabel(self, mapping: Mapping[str, str]) -> "Hypothesis":
        tracks: dict[str, Timeline] = {}
        for label, tl in self.tracks.items():
            new = mapping.get(label, label)
            tracks[new] = timeline_union(tracks.get(new, Timeline()), tl)
        return Hypothesis(self.recording_id, tracks)

    def crop(self, region: Timeline) -> "Hypothesis":
        return Hypothesis(
            self.recording_id,
            {k: timeline_intersection(v, region) for k, v in self.tracks.items()},
        )


@dataclass(frozen=True)
class SpeechRegions:
    """Speech/non-speech map of one recording (a VAD result)."""

    recording_id: str
    regions: Timeline = field(default_factory=Timeline)
