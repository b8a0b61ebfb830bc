"""Maximum-overlap one-to-one speaker matching."""

from __future__ import annotations

from typing import Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .timeline import Timeline, overlap_duration


def overlap_matrix(
    rows: Mapping[str, Timeline], cols: Mapping[str, Timeline]
) -> tuple[list[str], list[str], np.ndarray]:
    """Pairwise overlap durations (ms) with labels in lexicographic order."""
    r_labels, c_labels = sorted(rows), sorted(cols)
    w = np.zeros((len(r_labels), len(c_labels)), dtype=np.int64)
    for i, r in enumerate(r_labels):
        for j, c in enumerate(c_labels):
            w[i, j] = overlap_duration(rows[r], cols[c])
    return r_labels, c_labels, w


def max_overlap_mapping(
    hyp_tracks: Mapping[str, Timeline], ref_tracks: Mapping[str, Timeline]
) -> dict[str, str]:
    """Injective map hypothesis label -> reference label maximizing total overlap.

    Pairs that share no time are left out: a zero-overlap pairing carries no
    evidence and would only make the result depend on label order.
    """
    h_labels, r_labels, w = overlap_matrix(hyp_tracks, ref_tracks)
    if w.size == 0 or not w.any():
        return {}
    # scipy visits rows/cols in the (sorted) label order, which fixes ties
    rows, cols = linear_sum_assignment(w, maximize=True)
    return {h_labels[i]: r_labels[j] for i, j in zip(rows, cols) if w[i, j] > 0}


def mapping_value(
    mapping: Mapping[str, str],
    hyp_tracks: Mapping[str, Timeline],
    ref_tracks: Mapping[str, Timeline],
) -> int:
    return sum(overlap_duration(hyp_tracks[h], ref_tracks[r]) for h, r in mapping.items())
