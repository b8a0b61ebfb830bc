"""Speaker clustering of embedded segments.

Pipeline: global centroid-linkage AHC with a high stopping threshold, then
duration-gated selection of speaker clusters, then assignment of the
remaining (minor) clusters to speakers behind a speaker-verification gate.
Minor clusters failing the gate are pooled into a single unassigned track.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .segmentation import EmbeddedSegment
from .timeline import Hypothesis, Timeline

UNASSIGNED = "UNASSIGNED"


@dataclass(frozen=True)
class ClusteringConfig:
    ahc_stop_threshold: float = 0.55
    min_speaker_duration_ms: int = 2500
    sv_threshold: float = 0.0

    def __post_init__(self):
        if self.min_speaker_duration_ms <= 0:
            raise ValueError("min_speaker_duration_ms must be positive")

    @classmethod
    def c1(cls) -> "ClusteringConfig":
        """High-purity setting: stop at 0.6, speakers need more than 4 s."""
        return cls(0.6, 4000, 0.0)

    @classmethod
    def c2(cls) -> "ClusteringConfig":
        return cls(0.55, 2500, 0.0)


@dataclass(frozen=True, eq=False)
class SpeakerCluster:
    label: str
    members: tuple[EmbeddedSegment, ...]
    centroid: np.ndarray = field(repr=False)

    @property
    def duration(self) -> int:
        return cluster_duration(self.members)


@dataclass(frozen=True, eq=False)
class DiarizationResult:
    hypothesis: Hypothesis
    speaker_clusters: tuple[SpeakerCluster, ...]
    unassigned_label: str | None = None
    unassigned: tuple[EmbeddedSegment, ...] = ()

    def centroids(self) -> np.ndarray:
        return np.array([c.centroid for c in self.speaker_clusters])


def cluster_duration(members: Sequence[EmbeddedSegment]) -> int:
    return sum(s.duration for s in members)


def _centroid_of(members: Sequence[EmbeddedSegment]) -> np.ndarray:
    total = np.sum([s.frame_sum for s in members], axis=0).astype(np.float64)
    n = np.linalg.norm(total)
    if n == 0:
        raise ValueError("cluster mean has zero norm")
    return total / n


def _time_order(segs: Sequence[EmbeddedSegment]) -> list[EmbeddedSegment]:
    return sorted(segs, key=lambda s: (s.start_ms, s.channel, s.end_ms))


def ahc_cluster(
    segs: Sequence[EmbeddedSegment], stop_threshold: float
) -> list[list[EmbeddedSegment]]:
    """Centroid-linkage agglomerative clustering over all segment pairs.

    The most similar pair of clusters is merged while its cosine similarity
    is at least ``stop_threshold``.  Equal similarities resolve to the pair
    whose earlier cluster starts first, then the other cluster's start.
    Clusters are returned ordered by the start of their earliest member.
    """
    order = _time_order(segs)
    n = len(order)
    if n == 0:
        return []
    sums = np.stack([s.frame_sum for s in order]).astype(np.float64)
    norms = np.linalg.norm(sums, axis=1, keepdims=True)
    cents = np.divide(sums, norms, out=np.zeros_like(sums), where=norms > 0)
    alive = norms[:, 0] > 0
    members: list[list[int]] = [[i] for i in range(n)]

    sim = np.clip(cents @ cents.T, -1.0, 1.0)
    sim[~alive, :] = -np.inf
    sim[:, ~alive] = -np.inf
    np.fill_diagonal(sim, -np.inf)
    best_idx = np.argmax(sim, axis=1)
    best_val = sim[np.arange(n), best_idx]

    while n > 1:
        i = int(np.argmax(best_val))
        if not best_val[i] >= stop_threshold:
            break
        a, b = sorted((i, int(best_idx[i])))
        members[a].extend(members[b])
        members[b] = []
        sums[a] += sums[b]
        cents[a] = sums[a] / np.linalg.norm(sums[a])
        alive[b] = False
        sim[b, :] = -np.inf
        sim[:, b] = -np.inf
        best_val[b] = -np.inf
        row = np.where(alive, np.clip(cents @ cents[a], -1.0, 1.0), -np.inf)
        row[a] = -np.inf
        sim[a, :] = row
        sim[:, a] = row
        best_idx[a] = int(np.argmax(row))
        best_val[a] = row[best_idx[a]]

        stale = np.flatnonzero(alive & ((best_idx == a) | (best_idx == b)))
        for r in stale:
            if r == a:
                continue
            best_idx[r] = int(np.argmax(sim[r]))
            best_val[r] = sim[r, best_idx[r]]
        better = alive & ((row > best_val) | ((row == best_val) & (a < best_idx)))
        better[a] = False
        best_idx[better] = a
        best_val[better] = row[better]

    clusters = [[order[k] for k in sorted(m)] for m in members if m]
    # zero-norm segments never merge but still belong to a cluster
    return sorted(clusters, key=lambda c: (c[0].start_ms, c[0].channel, c[0].end_ms))


def select_speakers(
    clusters: Sequence[Sequence[EmbeddedSegment]], cfg: ClusteringConfig
) -> tuple[list[SpeakerCluster], list[list[EmbeddedSegment]]]:
    """Keep clusters strictly longer than the minimum speaker duration."""
    speakers: list[SpeakerCluster] = []
    minor: list[list[EmbeddedSegment]] = []
    for cluster in clusters:
        if cluster_duration(cluster) > cfg.min_speaker_duration_ms:
            label = f"spk{len(speakers):02d}"
            speakers.append(SpeakerCluster(label, tuple(cluster), _centroid_of(cluster)))
        else:
            minor.append(list(cluster))
    return speakers, minor


def assign_minor_clusters(
    speakers: Sequence[SpeakerCluster],
    minor: Sequence[Sequence[EmbeddedSegment]],
    sv_threshold: float,
    recording_id: str = "",
) -> DiarizationResult:
    """Attach each minor cluster to its most similar speaker, or set it aside.

    Similarities are measured against the speaker centroids as they stood
    before any assignment, so the outcome does not depend on the order of
    ``minor``.  Final centroids are recomputed over all members afterwards.
    """
    gained: list[list[EmbeddedSegment]] = [[] for _ in speakers]
    unassigned: list[EmbeddedSegment] = []
    frozen = np.array([s.centroid for s in speakers]) if speakers else None
    for cluster in minor:
        if frozen is None:
            unassigned.extend(cluster)
            continue
        total = np.sum([s.frame_sum for s in cluster], axis=0).astype(np.float64)
        norm = np.linalg.norm(total)
        if norm == 0:
            unassigned.extend(cluster)
            continue
        sims = np.clip(frozen @ (total / norm), -1.0, 1.0)
        k = int(np.argmax(sims))
        if sims[k] >= sv_threshold:
            gained[k].extend(cluster)
        else:
            unassigned.extend(cluster)

    final: list[SpeakerCluster] = []
    for spk, extra in zip(speakers, gained):
        if extra:
            mem = tuple(_time_order(list(spk.members) + extra))
            final.append(SpeakerCluster(spk.label, mem, _centroid_of(mem)))
        else:
            final.append(spk)
    tracks = {c.label: Timeline(s.segment for s in c.members) for c in final}
    unassigned = _time_order(unassigned)
    label = None
    if unassigned:
        label = UNASSIGNED
        tracks[UNASSIGNED] = Timeline(s.segment for s in unassigned)
    return DiarizationResult(
        Hypothesis(recording_id, tracks), tuple(final), label, tuple(unassigned)
    )


def cluster_segments(
    segs: Sequence[EmbeddedSegment], cfg: ClusteringConfig, recording_id: str = ""
) -> DiarizationResult:
    clusters = ahc_cluster(segs, cfg.ahc_stop_threshold)
    speakers, minor = select_speakers(clusters, cfg)
    return assign_minor_clusters(speakers, minor, cfg.sv_threshold, recording_id)


def leakage_filter(
    segs: Sequence[EmbeddedSegment], reference_centroids, filter_threshold: float = 0.2
) -> list[EmbeddedSegment]:
    """Drop segments whose best cosine to any reference centroid is below the threshold."""
    cents = np.asarray(reference_centroids, dtype=np.float64)
    if cents.size == 0:
        raise ValueError("leakage filtering needs at least one reference centroid")
    cents = cents.reshape(len(cents), -1)
    cents = cents / np.linalg.norm(cents, axis=1, keepdims=True)
    kept = []
    for seg in segs:
        norm = np.linalg.norm(seg.embedding)
        if norm == 0:
            continue
        best = float(np.max(np.clip(cents @ (seg.embedding / norm), -1.0, 1.0)))
        if best >= filter_threshold:
            kept.append(seg)
    return kept
