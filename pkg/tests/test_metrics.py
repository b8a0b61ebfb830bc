import numpy as np
import pytest

from diarfuse.metrics import (
    DerBreakdown,
    ScoringConfig,
    UndefinedMetricError,
    compute_der,
    compute_jer,
    corpus_stats,
    optimal_speaker_map,
    overlap_ratio,
    score_recordings,
)
from diarfuse.synthetic import SyntheticConfig, synthesize_conversation
from diarfuse.timeline import Hypothesis, Timeline

from oracles import (
    brute_force_assignment,
    frame_der,
    frame_jer,
    overlap_weights,
    random_hypothesis,
)

NO_COLLAR = ScoringConfig(collar_ms=0)


def H(rec="r", **tracks):
    return Hypothesis(rec, {k: Timeline(v) for k, v in tracks.items()})


def test_map_recovers_renaming():
    ref = H(A=[(0, 1000)], B=[(1000, 3000)], C=[(500, 800)])
    hyp = ref.relabel({"A": "x", "B": "y", "C": "z"})
    assert optimal_speaker_map(ref, hyp) == {"x": "A", "y": "B", "z": "C"}


def test_map_disjoint_supports():
    assert optimal_speaker_map(H(A=[(0, 10)]), H(x=[(20, 30)])) == {}


def test_map_optimal_vs_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(200):
        ref = random_hypothesis(rng, max_speakers=6, horizon_ms=20_000, prefix="r")
        hyp = random_hypothesis(rng, max_speakers=6, horizon_ms=20_000, prefix="h")
        m = optimal_speaker_map(ref, hyp)
        w, h_labels, r_labels = overlap_weights(hyp.tracks, ref.tracks)
        got = sum(w[h_labels.index(h), r_labels.index(r)] for h, r in m.items())
        assert got == brute_force_assignment(w)


def test_der_identity():
    ref = H(A=[(0, 5000)], B=[(3000, 8000)])
    assert compute_der(ref, ref, NO_COLLAR).der == 0.0


def test_der_single_speaker_miss():
    d = compute_der(H(A=[(0, 10_000)]), H(X=[(0, 8000)]), NO_COLLAR)
    assert (d.missed_ms, d.false_alarm_ms, d.speaker_error_ms) == (2000, 0, 0)
    assert d.der == pytest.approx(0.20)


def test_der_overlap_example_and_oracle():
    ref = H(A=[(0, 5000)], B=[(3000, 8000)])
    hyp = H(X=[(0, 4000)], Y=[(4000, 8000)])
    d = compute_der(ref, hyp, NO_COLLAR)
    assert (d.missed_ms, d.false_alarm_ms, d.speaker_error_ms, d.scored_speaker_ms) == (
        2000, 0, 0, 10_000)
    assert d.der == 0.2
    err, scored = frame_der(ref, hyp)
    assert err / scored == 0.2


def test_der_empty_hypothesis_is_all_miss():
    ref = H(A=[(0, 3000)], B=[(1000, 2000)])
    d = compute_der(ref, Hypothesis("r"), NO_COLLAR)
    assert d.missed_ms == d.scored_speaker_ms == 4000 and d.der == 1.0


def test_der_no_scored_time():
    d = compute_der(Hypothesis("r"), H(X=[(0, 100)]), NO_COLLAR)
    assert d.false_alarm_ms == 100
    with pytest.raises(UndefinedMetricError):
        d.der
    with pytest.raises(UndefinedMetricError):
        DerBreakdown().der


@pytest.mark.parametrize("collar,overlap", [(0, True), (0, False), (250, True), (100, False)])
def test_der_matches_frame_oracle(collar, overlap):
    rng = np.random.default_rng(collar + overlap)
    cfg = ScoringConfig(collar, overlap)
    for _ in range(150):
        ref = random_hypothesis(rng, max_speakers=4, horizon_ms=20_000, grid=10, prefix="r")
        hyp = random_hypothesis(rng, max_speakers=4, horizon_ms=20_000, grid=10, prefix="h")
        d = compute_der(ref, hyp, cfg)
        err, scored = frame_der(ref, hyp, 10, collar, overlap)
        assert (d.error_ms, d.scored_speaker_ms) == (10 * err, 10 * scored)


def test_der_invariant_under_relabeling():
    rng = np.random.default_rng(4)
    for _ in range(50):
        ref = random_hypothesis(rng, min_speakers=1, horizon_ms=20_000)
        hyp = random_hypothesis(rng, min_speakers=1, horizon_ms=20_000)
        perm = {s: f"z{i}" for i, s in enumerate(reversed(hyp.speakers))}
        assert compute_der(ref, hyp) == compute_der(ref, hyp.relabel(perm))


def test_collar_never_increases_scored_time():
    rng = np.random.default_rng(6)
    for _ in range(50):
        ref = random_hypothesis(rng, min_speakers=1, horizon_ms=20_000)
        hyp = random_hypothesis(rng, horizon_ms=20_000)
        scored = [compute_der(ref, hyp, ScoringConfig(c)).scored_speaker_ms
                  for c in (0, 50, 250, 1000)]
        assert scored == sorted(scored, reverse=True)
        d = compute_der(ref, hyp, NO_COLLAR)
        assert min(d.missed_ms, d.false_alarm_ms, d.speaker_error_ms) >= 0
        assert d.missed_ms <= d.scored_speaker_ms


def test_jer_examples():
    ref = H(A=[(0, 5000)], B=[(3000, 8000)])
    assert compute_jer(ref, ref) == 0.0
    assert compute_jer(H(A=[(0, 10_000)]), H(X=[(0, 5000)])) == 50.0
    assert compute_jer(H(A=[(0, 10)], B=[(20, 30)]), Hypothesis("r")) == 100.0
    with pytest.raises(UndefinedMetricError):
        compute_jer(Hypothesis("r"), ref)


def test_jer_matches_frame_oracle():
    rng = np.random.default_rng(9)
    for _ in range(200):
        ref = random_hypothesis(rng, min_speakers=1, max_speakers=4, horizon_ms=20_000, grid=10)
        hyp = random_hypothesis(rng, max_speakers=4, horizon_ms=20_000, grid=10, prefix="h")
        if not ref.tracks:
            continue
        j = compute_jer(ref, hyp)
        assert 0.0 <= j <= 100.0
        assert round(j, 9) in frame_jer(ref, hyp)


def test_overlap_ratio_examples():
    assert overlap_ratio(H(A=[(0, 10_000)], B=[(5000, 10_000)])) == 50.0
    assert overlap_ratio(H(A=[(0, 10_000)])) == 0.0
    with pytest.raises(UndefinedMetricError):
        overlap_ratio(Hypothesis("r"))


def test_corpus_stats_examples():
    st = corpus_stats([H("one", A=[(0, 1000)])])
    assert st.speaker_histogram == {1: 1}
    assert st.rows == [("one", 0.0, 1)]
    empty = corpus_stats([])
    assert empty.rows == [] and empty.speaker_histogram == {}
    assert "recording_id" in st.to_tsv()


def test_corpus_stats_on_known_synthetic_corpus():
    specs = [(1, 0.0), (2, 0.05), (3, 0.071), (3, 0.12), (5, 0.071)]
    refs = [
        synthesize_conversation(SyntheticConfig(num_speakers=n, duration_ms=120_000,
                                                overlap_ratio_target=t, seed=i,
                                                recording_id=f"c{i}")).reference
        for i, (n, t) in enumerate(specs)
    ]
    st = corpus_stats(refs, overlap_bins=[0, 2.5, 5, 7.5, 10, 100])
    assert st.speaker_histogram == {1: 1, 2: 1, 3: 2, 5: 1}
    for (_, ratio, n), (want_n, target) in zip(st.rows, specs):
        assert n == want_n and abs(ratio - 100 * target) <= 2.0
    assert st.overlap_counts.sum() == len(specs)


def test_score_report_rows_and_total():
    ref = [H("a", A=[(0, 10_000)]), H("b", A=[(0, 5000)], B=[(5000, 10_000)])]
    hyp = [H("a", X=[(0, 8000)]), H("zzz", X=[(0, 10)])]
    rep = score_recordings(ref, hyp, NO_COLLAR)
    assert [r.recording_id for r in rep.rows] == ["a", "b"]
    assert rep.rows[1].der.missed_ms == 10_000
    assert rep.total.der == rep.rows[0].der + rep.rows[1].der
    assert rep.unmatched == ["zzz"]
    lines = rep.to_tsv().splitlines()
    assert lines[0].split("\t") == ["recording_id", "DER", "miss", "FA", "spkerr", "JER"]
    assert lines[3].startswith("TOTAL\t60.000\t60.000\t0.000\t0.000\t")
    assert "zzz" in lines[-1]


def test_score_identity_total_zero():
    ref = [H("a", A=[(0, 10_000)], B=[(2000, 4000)])]
    rep = score_recordings(ref, ref)
    assert rep.to_tsv().splitlines()[-1] == "TOTAL\t0.000\t0.000\t0.000\t0.000\t0.000"
