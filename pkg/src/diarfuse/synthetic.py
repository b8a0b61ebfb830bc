"""Synthetic conversations with known ground truth.

A conversation is a schedule of alternating speaker turns on the frame
grid, optionally with pauses, overlapped speech and planted "leakage"
bursts.  Each active frame is the speaker's centroid plus isotropic
Gaussian noise, renormalized.  Overlapping talkers are emitted on channel 1
as an ideal two-channel separator would; a mixed single-channel stream
(frame-wise sum, renormalized) is produced alongside for runs without
separation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingStream
from .timeline import Hypothesis, SpeechRegions, Timeline


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticConfig:
    num_speakers: int = 4
    duration_ms: int = 120_000
    dim: int = 128
    noise_sigma: float = 0.1
    overlap_ratio_target: float = 0.0
    mean_turn_ms: int = 4000
    min_centroid_angle_deg: float = 90.0
    seed: int = 0
    frame_period_ms: int = 80
    pause_probability: float = 0.0
    mean_pause_ms: int = 600
    leakage_ratio: float = 0.0
    mean_leakage_ms: int = 800
    recording_id: str = "rec"

    def __post_init__(self):
        if self.num_speakers < 1:
            raise ValueError("num_speakers must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 <= self.overlap_ratio_target < 1.0:
            raise ValueError("overlap_ratio_target must be in [0, 1)")
        if not 0.0 <= self.leakage_ratio < 1.0:
            raise ValueError("leakage_ratio must be in [0, 1)")
        if self.dim < 1 or self.frame_period_ms < 1 or self.mean_turn_ms < 1:
            raise ValueError("dim, frame_period_ms and mean_turn_ms must be positive")
        if self.duration_ms < 2 * self.frame_period_ms:
            raise ValueError("duration_ms must span at least two frames")


@dataclass(frozen=True, eq=False)
class SyntheticConversation:
    streams: tuple[EmbeddingStream, EmbeddingStream]
    reference: Hypothesis
    regions: SpeechRegions
    mixed: EmbeddingStream
    centroids: np.ndarray = field(repr=False)
    leakage: Timeline = field(default_factory=Timeline)


def sample_centroids(
    rng: np.random.Generator, n: int, dim: int, min_angle_deg: float,
    tries: int = 1000, restarts: int = 50,
) -> np.ndarray:
    """Unit vectors with pairwise angle >= ``min_angle_deg`` by rejection sampling."""
    max_cos = math.cos(math.radians(min_angle_deg)) + 1e-12
    for _ in range(restarts):
        chosen: list[np.ndarray] = []
        for _ in range(n):
            for _ in range(tries):
                v = rng.standard_normal(dim)
                v /= np.linalg.norm(v)
                if all(float(v @ c) <= max_cos for c in chosen):
                    chosen.append(v)
                    break
            else:
                break
        if len(chosen) == n:
            return np.array(chosen)
    raise SimulationError(
        f"could not place {n} centroids {min_angle_deg} degrees apart in {dim} dimensions"
    )


def _frames_of(length_ms: float, period: int, minimum: int) -> int:
    return max(minimum, int(round(length_ms / period)))


def _schedule(cfg: SyntheticConfig, rng: np.random.Generator, n_frames: int):
    p = cfg.frame_period_ms
    turns: list[tuple[int, int, int]] = []
    order = list(rng.permutation(cfg.num_speakers))
    t, prev = 0, -1
    while t < n_frames:
        if turns and cfg.pause_probability > 0 and rng.random() < cfg.pause_probability:
            t += _frames_of(rng.exponential(cfg.mean_pause_ms), p, 1)
            if t >= n_frames:
                break
        if order:
            spk = int(order.pop(0))
        elif cfg.num_speakers == 1:
            spk = 0
        else:
            spk = int(rng.integers(cfg.num_speakers - 1))
            spk += spk >= prev
        length = _frames_of(rng.gamma(2.0, cfg.mean_turn_ms / 2.0), p, 2)
        end = min(t + length, n_frames)
        turns.append((spk, t, end))
        t, prev = end, spk
    return turns


def _inject_overlap(cfg, rng, turns):
    speech = sum(e - s for _, s, e in turns)
    needed = int(round(cfg.overlap_ratio_target * speech))
    overlaps: list[tuple[int, int, int]] = []
    if needed == 0:
        return overlaps
    if cfg.num_speakers < 2:
        raise SimulationError("overlapped speech needs at least two speakers")
    for k in rng.permutation(len(turns)):
        if needed <= 0:
            break
        spk, s, e = turns[k]
        if e - s < 2:
            continue
        want = _frames_of(rng.gamma(2.0, cfg.mean_turn_ms / 4.0), cfg.frame_period_ms, 1)
        length = min(want, e - s - 1, needed)
        start = s + int(rng.integers(e - s - length + 1))
        other = int(rng.integers(cfg.num_speakers - 1))
        other += other >= spk
        overlaps.append((other, start, start + length))
        needed -= length
    if needed > 0:
        raise SimulationError(
            f"overlap ratio {cfg.overlap_ratio_target} unattainable with this schedule"
        )
    return sorted(overlaps, key=lambda o: o[1])


def _plant_leakage(cfg, rng, turns, ch1_busy: np.ndarray) -> list[tuple[int, int]]:
    if cfg.leakage_ratio == 0:
        return []
    n_bursts = int(round(cfg.leakage_ratio / (1 - cfg.leakage_ratio) * len(turns)))
    busy = ch1_busy.copy()
    bursts = []
    speech_turns = [(s, e) for _, s, e in turns if e - s >= 4]
    for _ in range(n_bursts * 20):
        if len(bursts) == n_bursts or not speech_turns:
            break
        s, e = speech_turns[int(rng.integers(len(speech_turns)))]
        length = min(_frames_of(rng.gamma(2.0, cfg.mean_leakage_ms / 2.0), cfg.frame_period_ms, 2),
                     e - s)
        start = s + int(rng.integers(e - s - length + 1))
        # keep one idle frame on each side so bursts stay separate segments
        lo, hi = max(start - 1, 0), min(start + length + 1, len(busy))
        if busy[lo:hi].any():
            continue
        busy[start : start + length] = True
        bursts.append((start, start + length))
    return sorted(bursts)


def synthesize_conversation(cfg: SyntheticConfig) -> SyntheticConversation:
    rng = np.random.default_rng(cfg.seed)
    p = cfg.frame_period_ms
    n_frames = cfg.duration_ms // p
    cents = sample_centroids(rng, cfg.num_speakers, cfg.dim, cfg.min_centroid_angle_deg)
    turns = _schedule(cfg, rng, n_frames)
    overlaps = _inject_overlap(cfg, rng, turns)

    ch0_src = np.full(n_frames, -1)
    for spk, s, e in turns:
        ch0_src[s:e] = spk
    ch1_src = np.full(n_frames, -1)
    for spk, s, e in overlaps:
        ch1_src[s:e] = spk
    bursts = _plant_leakage(cfg, rng, turns, ch1_src >= 0)
    leak_dirs = rng.standard_normal((len(bursts), cfg.dim))
    leak_dirs /= np.linalg.norm(leak_dirs, axis=1, keepdims=True) if len(bursts) else 1.0
    ch1_leak = np.full(n_frames, -1)
    for k, (s, e) in enumerate(bursts):
        ch1_leak[s:e] = k

    def emit(base: np.ndarray) -> np.ndarray:
        if cfg.noise_sigma == 0:
            return base.copy()
        noisy = base + cfg.noise_sigma * rng.standard_normal(base.shape)
        return noisy / np.linalg.norm(noisy, axis=1, keepdims=True)

    ch0 = np.zeros((n_frames, cfg.dim))
    on0 = ch0_src >= 0
    ch0[on0] = emit(cents[ch0_src[on0]])
    ch1 = np.zeros((n_frames, cfg.dim))
    on1 = ch1_src >= 0
    ch1[on1] = emit(cents[ch1_src[on1]])
    mixed = ch0.copy()
    if on1.any():
        both = ch0[on1] + ch1[on1]
        mixed[on1] = both / np.linalg.norm(both, axis=1, keepdims=True)
    leak = ch1_leak >= 0
    if leak.any():
        ch1[leak] = emit(leak_dirs[ch1_leak[leak]])

    active1 = np.flatnonzero(on1 | leak)
    n1 = int(active1[-1]) + 1 if len(active1) else 0
    rec = cfg.recording_id
    streams = (
        EmbeddingStream(rec, 0, cfg.dim, ch0.astype(np.float32), p, 0),
        EmbeddingStream(rec, 1, cfg.dim, ch1[:n1].astype(np.float32), p, 0),
    )
    mixed_stream = EmbeddingStream(rec, 0, cfg.dim, mixed.astype(np.float32), p, 0)

    segs: dict[str, list[tuple[int, int]]] = {}
    for spk, s, e in turns + overlaps:
        segs.setdefault(f"S{spk}", []).append((s * p, e * p))
    reference = Hypothesis(rec, {k: Timeline(v) for k, v in segs.items()})
    regions = SpeechRegions(rec, reference.speech())
    leakage = Timeline((s * p, e * p) for s, e in bursts)
    return SyntheticConversation(streams, reference, regions, mixed_stream, cents, leakage)
