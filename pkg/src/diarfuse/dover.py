"""Overlap-aware DOVER-style fusion anchored on a root hypothesis.

Every hypothesis is aligned to the root by maximum-overlap speaker
matching; hypothesis speakers without a partner are discarded.  Then, for
each root speaker separately, the aligned tracks vote with per-hypothesis
weights and the instants whose vote mass reaches the threshold are kept.
Because votes are counted per speaker, overlapped speech survives fusion,
and the fused output never has more speakers than the root.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .matching import max_overlap_mapping
from .timeline import Hypothesis, Timeline, elementary_activity, timeline_from_mask

# float slack for sums such as 0.34 + 0.33 + 0.33
_EPS = 1e-9


class FusionConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SpeakerAlignment:
    mapping: Mapping[str, str]
    discarded: frozenset[str] = frozenset()

    def __post_init__(self):
        targets = list(self.mapping.values())
        if len(set(targets)) != len(targets):
            raise ValueError("speaker alignment must be injective")
        if self.discarded & set(self.mapping):
            raise ValueError("a speaker cannot be both mapped and discarded")

    def source_for(self, root_label: str) -> str | None:
        for h, r in self.mapping.items():
            if r == root_label:
                return h
        return None


@dataclass(frozen=True)
class FusionConfig:
    """Voting weights keyed by hypothesis id, the root id and the vote threshold."""

    weights: Sequence[tuple[str, float]]
    root_id: str
    vote_threshold: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple((k, float(w)) for k, w in self.weights))
        ids = [k for k, _ in self.weights]
        if len(set(ids)) != len(ids):
            raise FusionConfigError("duplicate hypothesis id in weights")
        if any(w <= 0 for _, w in self.weights):
            raise FusionConfigError("voting weights must be positive")

    @classmethod
    def best_plus_agreement(cls, root_id: str, others: Sequence[str]) -> "FusionConfig":
        """Root at weight 1.0, the rest at 0.34, threshold 1.0.

        With three others this keeps the root's output and adds the regions
        where all three other systems agree.
        """
        return cls([(root_id, 1.0)] + [(o, 0.34) for o in others], root_id, 1.0)

    def weight_of(self, hyp_id: str) -> float | None:
        return dict(self.weights).get(hyp_id)


def align_to_root(root: Hypothesis, hyp: Hypothesis) -> SpeakerAlignment:
    mapping = max_overlap_mapping(hyp.tracks, root.tracks)
    discarded = frozenset(hyp.tracks) - frozenset(mapping)
    return SpeakerAlignment(mapping, discarded)


def vote(
    root: Hypothesis,
    aligned: Sequence[tuple[Hypothesis, SpeakerAlignment, float]],
    cfg: FusionConfig | None = None,
    threshold: float | None = None,
) -> Hypothesis:
    """Per-root-speaker weighted voting over exact elementary time cells."""
    if threshold is None:
        threshold = cfg.vote_threshold if cfg is not None else 1.0
    tracks: dict[str, Timeline] = {}
    for label in root.tracks:
        voters, weights = [], []
        for hyp, alignment, weight in aligned:
            src = alignment.source_for(label)
            if src is not None and src in hyp.tracks:
                voters.append(hyp.tracks[src])
                weights.append(weight)
        if not voters:
            continue
        bounds, active = elementary_activity(voters)
        mass = np.zeros(active.shape[1])
        for row, w in zip(active, weights):
            mass += np.where(row, w, 0.0)
        merged = timeline_from_mask(bounds, mass >= threshold - _EPS)
        if merged:
            tracks[label] = merged
    return Hypothesis(root.recording_id, tracks)


def fuse(hypotheses: Mapping[str, Hypothesis], cfg: FusionConfig) -> Hypothesis:
    """Fuse hypotheses (keyed by id) for a single recording.

    Only hypotheses listed in ``cfg.weights`` vote; the root votes through
    the identity alignment.
    """
    if cfg.root_id not in hypotheses:
        raise FusionConfigError(f"root hypothesis {cfg.root_id!r} not provided")
    root = hypotheses[cfg.root_id]
    aligned = []
    for hyp_id, weight in cfg.weights:
        if hyp_id not in hypotheses:
            continue
        hyp = hypotheses[hyp_id]
        if hyp.recording_id != root.recording_id:
            raise ValueError(
                f"recording mismatch: {hyp.recording_id!r} vs root {root.recording_id!r}"
            )
        if hyp_id == cfg.root_id:
            alignment = SpeakerAlignment({s: s for s in root.tracks})
        else:
            alignment = align_to_root(root, hyp)
        aligned.append((hyp, alignment, weight))
    return vote(root, aligned, cfg)
