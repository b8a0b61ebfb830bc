"""Diarization scoring (DER, JER) and corpus statistics.

All quantities are computed exactly on the elementary cells delimited by
every reference/hypothesis boundary; nothing is sampled on a frame grid.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .matching import max_overlap_mapping
from .timeline import (
    Hypothesis,
    Timeline,
    elementary_activity,
    timeline_from_mask,
    timeline_intersection,
    timeline_union,
    total_duration,
)


class UndefinedMetricError(ValueError):
    """The metric has no defined value (nothing to score against)."""


@dataclass(frozen=True)
class ScoringConfig:
    collar_ms: int = 250
    score_overlap: bool = True

    def __post_init__(self):
        if self.collar_ms < 0:
            raise ValueError("collar_ms must be >= 0")


@dataclass(frozen=True)
class DerBreakdown:
    missed_ms: int = 0
    false_alarm_ms: int = 0
    speaker_error_ms: int = 0
    scored_speaker_ms: int = 0

    @property
    def error_ms(self) -> int:
        return self.missed_ms + self.false_alarm_ms + self.speaker_error_ms

    @property
    def der(self) -> float:
        """Error ratio; raises :class:`UndefinedMetricError` with no scored time."""
        if self.scored_speaker_ms == 0:
            raise UndefinedMetricError("no scored reference speech")
        return self.error_ms / self.scored_speaker_ms

    def __add__(self, other: "DerBreakdown") -> "DerBreakdown":
        return DerBreakdown(
            self.missed_ms + other.missed_ms,
            self.false_alarm_ms + other.false_alarm_ms,
            self.speaker_error_ms + other.speaker_error_ms,
            self.scored_speaker_ms + other.scored_speaker_ms,
        )


def optimal_speaker_map(reference: Hypothesis, hypothesis: Hypothesis) -> dict[str, str]:
    """Hypothesis label -> reference label, maximizing total mapped overlap."""
    return max_overlap_mapping(hypothesis.tracks, reference.tracks)


def collar_zone(reference: Hypothesis, collar_ms: int) -> Timeline:
    if collar_ms <= 0:
        return Timeline()
    zone = []
    for tl in reference.tracks.values():
        for seg in tl:
            for b in (seg.start_ms, seg.end_ms):
                zone.append((max(0, b - collar_ms), b + collar_ms))
    return Timeline(zone)


def compute_der(
    reference: Hypothesis, hypothesis: Hypothesis, cfg: ScoringConfig = ScoringConfig()
) -> DerBreakdown:
    """Missed speech, false alarm and confusion against the reference.

    Instants within ``collar_ms`` of a reference boundary are not scored;
    with ``score_overlap=False`` neither are instants where more than one
    reference speaker talks.  The speaker map is optimized on the scored
    time only.
    """
    ref_labels = list(reference.tracks)
    hyp_labels = list(hypothesis.tracks)
    collar = collar_zone(reference, cfg.collar_ms)
    tracks = [reference.tracks[r] for r in ref_labels] + [hypothesis.tracks[h] for h in hyp_labels]
    bounds, active = elementary_activity(tracks + [collar])
    if active.shape[1] == 0:
        return DerBreakdown()
    nr = len(ref_labels)
    ref_act, hyp_act, in_collar = active[:nr], active[nr:-1], active[-1]
    width = np.diff(bounds)
    n_ref = ref_act.sum(axis=0)
    n_hyp = hyp_act.sum(axis=0)
    scored = ~in_collar
    if not cfg.score_overlap:
        scored &= n_ref <= 1

    scored_ref = {
        r: timeline_from_mask(bounds, ref_act[k] & scored) for k, r in enumerate(ref_labels)
    }
    scored_hyp = {
        h: timeline_from_mask(bounds, hyp_act[k] & scored) for k, h in enumerate(hyp_labels)
    }
    mapping = max_overlap_mapping(scored_hyp, scored_ref)
    n_match = np.zeros_like(n_ref)
    for h, r in mapping.items():
        n_match += hyp_act[hyp_labels.index(h)] & ref_act[ref_labels.index(r)]

    w = np.where(scored, width, 0)
    return DerBreakdown(
        missed_ms=int(np.sum(w * np.maximum(0, n_ref - n_hyp))),
        false_alarm_ms=int(np.sum(w * np.maximum(0, n_hyp - n_ref))),
        speaker_error_ms=int(np.sum(w * (np.minimum(n_ref, n_hyp) - n_match))),
        scored_speaker_ms=int(np.sum(w * n_ref)),
    )


def jer_terms(reference: Hypothesis, hypothesis: Hypothesis) -> list[float]:
    """Per-reference-speaker Jaccard error (0..1), in reference label order."""
    mapping = optimal_speaker_map(reference, hypothesis)
    inverse = {r: h for h, r in mapping.items()}
    terms = []
    for r, ref_tl in reference.tracks.items():
        h = inverse.get(r)
        if h is None:
            terms.append(1.0)
            continue
        hyp_tl = hypothesis.tracks[h]
        inter = total_duration(timeline_intersection(ref_tl, hyp_tl))
        union = total_duration(timeline_union(ref_tl, hyp_tl))
        terms.append(1.0 - inter / union)
    return terms


def compute_jer(reference: Hypothesis, hypothesis: Hypothesis) -> float:
    """Jaccard error rate in percent, averaged over reference speakers (no collar)."""
    terms = jer_terms(reference, hypothesis)
    if not terms:
        raise UndefinedMetricError("reference has no speakers")
    return 100.0 * sum(terms) / len(terms)


def overlap_ratio(reference: Hypothesis) -> float:
    """Percentage of speech time during which two or more speakers are active."""
    bounds, active = elementary_activity(list(reference.tracks.values()))
    if active.shape[1] == 0:
        raise UndefinedMetricError("reference contains no speech")
    width = np.diff(bounds)
    count = active.sum(axis=0)
    speech = int(width[count >= 1].sum())
    if speech == 0:
        raise UndefinedMetricError("reference contains no speech")
    return 100.0 * int(width[count >= 2].sum()) / speech


DEFAULT_OVERLAP_BINS = tuple(np.arange(0.0, 31.0, 2.5)) + (100.0,)


@dataclass
class CorpusStats:
    rows: list[tuple[str, float, int]] = field(default_factory=list)
    overlap_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    overlap_edges: np.ndarray = field(default_factory=lambda: np.zeros(0))
    speaker_histogram: dict[int, int] = field(default_factory=dict)

    def to_tsv(self) -> str:
        lines = ["recording_id\toverlap_pct\tnum_speakers"]
        for rec, ratio, n in self.rows:
            pct = "NA" if np.isnan(ratio) else f"{ratio:.3f}"
            lines.append(f"{rec}\t{pct}\t{n}")
        lines.append("")
        lines.append("overlap_bin_lo\toverlap_bin_hi\tcount")
        for lo, hi, c in zip(self.overlap_edges[:-1], self.overlap_edges[1:], self.overlap_counts):
            lines.append(f"{lo:g}\t{hi:g}\t{int(c)}")
        lines.append("")
        lines.append("num_speakers\tcount")
        for n, c in sorted(self.speaker_histogram.items()):
            lines.append(f"{n}\t{c}")
        return "\n".join(lines) + "\n"


def corpus_stats(
    references: Sequence[Hypothesis], overlap_bins: Sequence[float] = DEFAULT_OVERLAP_BINS
) -> CorpusStats:
    """Per-recording overlap ratio and speaker count, plus their histograms."""
    if not references:
        return CorpusStats()
    rows = []
    for ref in references:
        try:
            ratio = overlap_ratio(ref)
        except UndefinedMetricError:
            ratio = float("nan")
        rows.append((ref.recording_id, ratio, len(ref.tracks)))
    ratios = np.array([r for _, r, _ in rows])
    counts, edges = np.histogram(ratios[~np.isnan(ratios)], bins=np.asarray(overlap_bins))
    spk_hist = dict(sorted(Counter(n for _, _, n in rows).items()))
    return CorpusStats(rows, counts, edges, spk_hist)


@dataclass
class ScoreRow:
    recording_id: str
    der: DerBreakdown
    jer_terms: list[float]

    @property
    def jer(self) -> float:
        if not self.jer_terms:
            raise UndefinedMetricError("reference has no speakers")
        return 100.0 * sum(self.jer_terms) / len(self.jer_terms)


@dataclass
class ScoreReport:
    rows: list[ScoreRow]
    total: ScoreRow
    unmatched: list[str] = field(default_factory=list)

    def to_tsv(self) -> str:
        lines = ["recording_id\tDER\tmiss\tFA\tspkerr\tJER"]
        for row in self.rows + [self.total]:
            lines.append(_format_row(row))
        for rec in self.unmatched:
            lines.append(f"# unmatched hypothesis recording\t{rec}")
        return "\n".join(lines) + "\n"


def _pct(num: int, den: int) -> str:
    return "NA" if den == 0 else f"{100.0 * num / den:.3f}"


def _format_row(row: ScoreRow) -> str:
    d = row.der
    den = d.scored_speaker_ms
    jer = f"{row.jer:.3f}" if row.jer_terms else "NA"
    return "\t".join(
        [
            row.recording_id,
            _pct(d.error_ms, den),
            _pct(d.missed_ms, den),
            _pct(d.false_alarm_ms, den),
            _pct(d.speaker_error_ms, den),
            jer,
        ]
    )


def score_recordings(
    references: Sequence[Hypothesis],
    hypotheses: Sequence[Hypothesis],
    cfg: ScoringConfig = ScoringConfig(),
) -> ScoreReport:
    """Score every reference recording; a missing hypothesis counts as silence.

    Hypothesis recordings absent from the reference are listed in
    ``unmatched`` rather than dropped silently.
    """
    hyp_by_id = {h.recording_id: h for h in hypotheses}
    ref_ids = {r.recording_id for r in references}
    rows = []
    total_der = DerBreakdown()
    total_terms: list[float] = []
    for ref in references:
        hyp = hyp_by_id.get(ref.recording_id, Hypothesis(ref.recording_id))
        row = ScoreRow(ref.recording_id, compute_der(ref, hyp, cfg), jer_terms(ref, hyp))
        rows.append(row)
        total_der = total_der + row.der
        total_terms.extend(row.jer_terms)
    unmatched = [h.recording_id for h in hypotheses if h.recording_id not in ref_ids]
    return ScoreReport(rows, ScoreRow("TOTAL", total_der, total_terms), unmatched)
