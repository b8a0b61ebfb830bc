import numpy as np
import pytest

from diarfuse.embedding import save_embeddings
from diarfuse.metrics import overlap_ratio
from diarfuse.rttm import write_rttm
from diarfuse.synthetic import SimulationError, SyntheticConfig, synthesize_conversation


def test_single_speaker_no_overlap():
    conv = synthesize_conversation(SyntheticConfig(num_speakers=1, duration_ms=30_000, seed=2))
    assert conv.reference.speakers == ["S0"]
    assert len(conv.streams[1]) == 0
    assert overlap_ratio(conv.reference) == 0.0


def test_same_seed_same_output():
    cfg = SyntheticConfig(num_speakers=3, duration_ms=60_000, overlap_ratio_target=0.1,
                          leakage_ratio=0.1, pause_probability=0.3, seed=99)
    a, b = synthesize_conversation(cfg), synthesize_conversation(cfg)
    assert write_rttm(a.reference) == write_rttm(b.reference)
    for sa, sb in zip((*a.streams, a.mixed), (*b.streams, b.mixed)):
        assert save_embeddings(sa) == save_embeddings(sb)
    c = synthesize_conversation(SyntheticConfig(**{**cfg.__dict__, "seed": 100}))
    assert write_rttm(c.reference) != write_rttm(a.reference)


@pytest.mark.parametrize("target", [0.0, 0.03, 0.071, 0.15, 0.25])
def test_overlap_ratio_hits_target(target):
    for seed in range(3):
        conv = synthesize_conversation(
            SyntheticConfig(num_speakers=4, duration_ms=180_000, overlap_ratio_target=target,
                            seed=seed, pause_probability=0.2)
        )
        assert abs(overlap_ratio(conv.reference) - 100 * target) <= 2.0


def test_noise_free_frames_equal_centroids():
    conv = synthesize_conversation(
        SyntheticConfig(num_speakers=3, duration_ms=40_000, noise_sigma=0.0,
                        overlap_ratio_target=0.1, seed=5)
    )
    ch0, ch1 = conv.streams
    p = ch0.frame_period_ms
    cents = conv.centroids.astype(np.float32)
    for label, tl in conv.reference.tracks.items():
        c = cents[int(label[1:])]
        for seg in tl:
            for i in range(seg.start_ms // p, seg.end_ms // p):
                on0 = np.array_equal(ch0.frames[i], c)
                on1 = i < len(ch1) and np.array_equal(ch1.frames[i], c)
                assert on0 or on1


def test_centroid_separation():
    conv = synthesize_conversation(
        SyntheticConfig(num_speakers=6, dim=64, min_centroid_angle_deg=80, seed=1)
    )
    c = conv.centroids
    g = c @ c.T
    np.fill_diagonal(g, -1)
    assert g.max() <= np.cos(np.radians(80)) + 1e-9
    assert np.allclose(np.linalg.norm(c, axis=1), 1.0)


def test_infeasible_angle_raises():
    with pytest.raises(SimulationError):
        synthesize_conversation(SyntheticConfig(num_speakers=5, dim=2, min_centroid_angle_deg=100))


def test_overlap_with_one_speaker_raises():
    with pytest.raises(SimulationError):
        synthesize_conversation(SyntheticConfig(num_speakers=1, overlap_ratio_target=0.1))


def test_every_speaker_talks_and_regions_cover_speech():
    conv = synthesize_conversation(SyntheticConfig(num_speakers=5, duration_ms=60_000, seed=4))
    assert len(conv.reference.tracks) == 5
    assert conv.regions.regions == conv.reference.speech()


def test_leakage_lies_in_speech_and_off_overlap():
    conv = synthesize_conversation(
        SyntheticConfig(num_speakers=3, duration_ms=120_000, overlap_ratio_target=0.05,
                        leakage_ratio=0.2, seed=8)
    )
    assert conv.leakage
    speech = conv.regions.regions
    assert conv.leakage.intersection(speech) == conv.leakage
    overlap_frames = conv.leakage
    for tl in conv.reference.tracks.values():
        for other in conv.reference.tracks.values():
            if other is not tl:
                both = tl.intersection(other)
                assert not both.intersection(overlap_frames)
